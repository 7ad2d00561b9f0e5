"""Counter-based random streams keyed by (master seed, purpose, replication).

Every replication owns a Philox stream derived from ``SeedSequence`` with a
spawn key, so results never depend on how replications are scheduled.
"""

import numpy as np

# stream namespaces; keep stable, they are part of the reproducibility contract
SIMULATE = 0
LIMIT = 1
BOUNDS = 2
SCALING = 3
TAIL = 4


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def replication_streams(seed: int, namespace: int, rep: int, count: int = 1):
    """``count`` independent generators belonging to one replication."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(namespace), int(rep)))
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(count)]
