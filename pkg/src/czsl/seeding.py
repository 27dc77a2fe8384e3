"""Deterministic seed derivation.

Every random draw in the package flows through a generator built from a
composite seed: the experiment seed plus integer tags naming the consumer
(task index, purpose code, ...). Identical keys give identical streams;
distinct keys give statistically independent ones. Parts may be ints or
nested tuples of ints; they are flattened in order.
"""

import numpy as np


def _flatten(parts):
    out = []
    for p in parts:
        if isinstance(p, (tuple, list)):
            out.extend(_flatten(p))
        else:
            out.append(int(p))
    return out


def rng_for(*parts) -> np.random.Generator:
    """Generator keyed by the flattened integer parts."""
    return np.random.default_rng(tuple(_flatten(parts)))


def derive_seed(*parts) -> int:
    """Collapse a composite key to a single uint32, for APIs that store one."""
    ss = np.random.SeedSequence(tuple(_flatten(parts)))
    return int(ss.generate_state(1)[0])
