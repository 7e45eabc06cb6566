from adapter.decoder import FrozenDecoder, train_decoder_fixture
from adapter.generation import apply_repetition_penalty, generate
from adapter.prompt import ComposedInput, compose_input, stage3_loss
from adapter.training import TaskExample, train_stage3

__all__ = [
    "FrozenDecoder", "train_decoder_fixture", "ComposedInput", "compose_input",
    "stage3_loss", "TaskExample", "train_stage3", "apply_repetition_penalty", "generate",
]
