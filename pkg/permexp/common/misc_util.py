import numpy as np


def derive_seed_sequence(seed, *keys):
    """Return the seed sequence of the stream identified by `seed` and the integer `keys`.

    Streams with different keys are statistically independent, and a stream only depends on its
    own keys, so replications can be scheduled in any order or on any worker.
    """
    return np.random.SeedSequence([int(seed)] + [int(k) for k in keys])


def make_rng(seed, *keys):
    if isinstance(seed, np.random.Generator):
        assert not keys, 'keys cannot be applied to an existing generator'
        return seed
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng(derive_seed_sequence(seed, *keys))
