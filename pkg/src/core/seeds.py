import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministically derives an independent 32-bit seed for the task identified by keys."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1)[0])
