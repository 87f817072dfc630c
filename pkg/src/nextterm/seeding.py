"""Named RNG sub-streams so one seed reproduces a whole experiment."""

import numpy as np

_STREAMS = {"init": 0, "shuffle": 1, "synth": 2}


def substream(seed, name):
    """Independent generator for one of the named randomness consumers."""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(_STREAMS[name],))
    )
