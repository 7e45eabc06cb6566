import torch

from adapter.prompt import code_room, compose_input, truncate_code
from bridge.tokenizer import BOS, EOS, detokenize, encode_bytes


def apply_repetition_penalty(logits: torch.Tensor, emitted, penalty: float) -> torch.Tensor:
    """Divide positive logits of already emitted tokens by `penalty`, multiply negative ones"""
    if penalty == 1.0 or not emitted:
        return logits
    logits = logits.clone()
    index = torch.tensor(sorted(set(emitted)), dtype=torch.long)
    picked = logits[index]
    logits[index] = torch.where(picked > 0, picked / penalty, picked * penalty)
    return logits


def generate_ids(soft_prompt, instruction: str, code: str, decoder, max_new_tokens: int,
                 repetition_penalty: float = 1.1) -> list:
    """
    Greedy decoding after BOS until EOS, max_new_tokens or the end of the
    context. Code too long to fit is cut so that max_new_tokens still fit.
    """
    if max_new_tokens <= 0:
        return []
    # BOS follows the code
    if len(encode_bytes(code)) > code_room(soft_prompt, instruction, decoder, reserved=1):
        code = truncate_code(code, code_room(soft_prompt, instruction, decoder, reserved=1 + max_new_tokens))
    composed = compose_input(soft_prompt, instruction, code, decoder)
    embeddings = torch.cat([composed.embeddings, decoder.embed([BOS]).to(composed.embeddings.dtype)])
    emitted = []
    decoder.eval()
    with torch.no_grad():
        while len(emitted) < max_new_tokens and embeddings.shape[0] < decoder.context:
            logits = decoder(embeddings.unsqueeze(0))[0, -1]
            token = int(apply_repetition_penalty(logits, emitted, repetition_penalty).argmax())
            if token == EOS:
                break
            emitted.append(token)
            embeddings = torch.cat([embeddings, decoder.embed([token]).to(embeddings.dtype)])
    return emitted


def generate(soft_prompt, instruction: str, code: str, decoder, max_new_tokens: int,
             repetition_penalty: float = 1.1) -> str:
    return detokenize(generate_ids(soft_prompt, instruction, code, decoder, max_new_tokens, repetition_penalty))
