"""
Byte-level tokenizer shared by the bridge text stream and the decoder
"""
CLS, PAD, BOS, EOS = 0, 1, 2, 3
SPECIALS = 4
VOCAB_SIZE = 256 + SPECIALS


def encode_bytes(text: str) -> list:
    return [byte + SPECIALS for byte in text.encode("utf-8")]


def tokenize_code(code: str, max_len: int = 512) -> list:
    """[CLS] followed by byte ids, truncated to max_len ids in total"""
    return ([CLS] + encode_bytes(code))[:max(1, max_len)]


def detokenize(ids) -> str:
    data = bytes(i - SPECIALS for i in ids if i >= SPECIALS)
    return data.decode("utf-8", errors="replace")


def generation_tokens(code: str, max_len: int = 512):
    """Teacher-forced (input, target) ids: [BOS] + code predicts code + [EOS]"""
    body = encode_bytes(code)[:max(0, max_len - 1)]
    return [BOS] + body, body + [EOS]


def pad_batch(sequences, pad: int = PAD):
    """Right-pad to the longest sequence; returns (ids, mask) as nested lists"""
    width = max((len(s) for s in sequences), default=0)
    ids = [list(s) + [pad] * (width - len(s)) for s in sequences]
    mask = [[True] * len(s) + [False] * (width - len(s)) for s in sequences]
    return ids, mask
