"""Counter-based RNG streams.

Every random draw in the package comes from a Philox generator keyed by
(seed, stream, index) so that any stream can be replayed in isolation and
no draw depends on global state or call order.
"""

import numpy as np

# stream ids; fixed forever, they are part of the reproducibility contract
RESET = 1
RANDOM_POLICY = 2
POLICY_INIT = 3
GENERATOR_INIT = 4
DISCRIMINATOR_INIT = 5
DROPOUT = 6
SHUFFLE = 7

_MAX_SEED = 2**64


def rng_stream(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Independent generator for (seed, stream, index).

    The triple is packed into a 128-bit Philox key: low 64 bits hold the
    seed, the high word holds (index << 32) | stream.
    """
    seed = int(seed)
    if seed < 0 or seed >= _MAX_SEED:
        raise ValueError(f"seed must be in [0, 2**64): {seed}")
    if stream < 0 or index < 0:
        raise ValueError("stream and index must be non-negative")
    key = (((int(index) << 32) | int(stream)) << 64) | seed
    return np.random.Generator(np.random.Philox(key=key))
