"""Keyed random-number substreams for order-independent reproducibility.

Every random draw in a simulation is produced by a generator derived from
``(master_seed, purpose, *indices)``, where ``purpose`` is a short string
naming the draw site (e.g. ``"minibatch"``, ``"attack"``) and the indices
identify round, client, and step. Because the generator is a pure function
of the key, the same draw is obtained no matter which order clients are
evaluated in, whether evaluation is serial or threaded, and across runs
with the same master seed.
"""

import zlib

import numpy as np

__all__ = ["substream"]


def substream(master_seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Return a fresh generator for the draw identified by the key.

    The purpose string is folded to a 32-bit tag with CRC-32 (stable across
    runs and platforms, unlike ``hash``) and combined with the indices into
    a ``SeedSequence`` spawn key.

    Parameters:

        master_seed: experiment-level seed, shared by all substreams.
        purpose: name of the draw site.
        indices: integer coordinates of the draw (round, client, step, ...).

    Returns:

        numpy.random.Generator seeded purely from the key.
    """
    tag = zlib.crc32(purpose.encode("utf-8"))
    key = (tag,) + tuple(int(i) for i in indices)
    if any(i < 0 for i in key):
        raise ValueError(f"substream indices must be nonnegative, got {key}")
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=key))
