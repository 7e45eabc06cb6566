from bridge.losses import gtc_loss, gtg_loss, gtm_loss, mine_hard_negatives
from bridge.model import Bridge, BridgeOutput, bridge_forward, project_soft_prompt, text_only_forward
from bridge.tokenizer import detokenize, tokenize_code
from bridge.training import evaluate_alignment, train_stage2

__all__ = [
    "Bridge", "BridgeOutput", "tokenize_code", "detokenize", "bridge_forward",
    "text_only_forward", "gtc_loss", "gtm_loss", "gtg_loss", "mine_hard_negatives",
    "train_stage2", "evaluate_alignment", "project_soft_prompt",
]
