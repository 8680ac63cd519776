"""Independent, reproducible random streams keyed by integer tuples.

Every consumer derives its generator from ``(seed, *keys)`` through a
Philox counter-based bit generator, so results do not depend on the order
in which runs or bootstrap replicates are executed.
"""

import numpy as np

CALIBRATION = 0
DATA = 1
BOOTSTRAP = 2
ORACLE = 3
CHECK = 4


def stream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
