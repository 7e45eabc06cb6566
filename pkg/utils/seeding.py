import random

import numpy as np
import torch


def set_seed(seed: int, threads: int = 1) -> None:
    """Seed every RNG and pin torch to deterministic kernels and a fixed thread count"""
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(True)


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from a base seed and any ints identifying the call site"""
    sequence = np.random.SeedSequence([int(part) & 0xFFFFFFFF for part in parts])
    return int(sequence.generate_state(1)[0])
