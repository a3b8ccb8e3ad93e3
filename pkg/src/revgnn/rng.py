"""Named random substreams derived from one integer seed.

Every consumer of randomness asks for its own stream so that, for example,
changing the masking rate never shifts which negatives get sampled.
"""
import numpy as np

STREAMS = ("split", "init", "shuffle", "masking", "sampling")


def stream(seed: int, name: str) -> np.random.Generator:
    key = STREAMS.index(name)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(key,))))


def streams(seed: int, names=STREAMS) -> dict[str, np.random.Generator]:
    return {name: stream(seed, name) for name in names}
