"""Seed derivation and counter-based uniforms.

Everything random in the package flows from SplitMix64 (Steele, Lea and
Flood, 2014). Seeds are mixed with :func:`derive_seed`; per-iteration loss
draws hash ``(seed, k, i, j)`` directly so they do not depend on the order in
which slots or runs are evaluated. Bulk sampling (node positions, cost
coefficients) uses numpy's PCG64 seeded with a derived 64-bit value.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def splitmix64(x):
    """SplitMix64 finalizer applied to a python int (mod 2**64)."""
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def splitmix64_array(x):
    """Vectorised :func:`splitmix64` over a ``uint64`` array."""
    z = np.asarray(x, dtype=np.uint64) + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_seed(seed, *parts):
    """Mix a root seed with integer ``parts`` into a new 64-bit seed.

    Strings are accepted as stream tags and are folded in byte by byte.
    """
    h = splitmix64(int(seed) & _MASK)
    for part in parts:
        if isinstance(part, str):
            for byte in part.encode("utf-8"):
                h = splitmix64(h ^ byte)
        else:
            h = splitmix64(h ^ (int(part) & _MASK))
    return h


def generator(seed, *parts):
    """numpy ``Generator`` (PCG64) seeded from :func:`derive_seed`."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *parts)))


def slot_keys(seed, src, dst):
    """Per directed edge keys ``derive_seed(seed, i, j)`` as ``uint64``."""
    return np.array([derive_seed(seed, int(i), int(j)) for i, j in zip(src, dst)],
                    dtype=np.uint64)


def keyed_uniform(keys, k):
    """Uniforms in [0, 1) for iteration ``k``, one per key.

    The value only depends on ``(key, k)``; 53 high bits are used.
    """
    kk = np.uint64(splitmix64(int(k) & _MASK))
    h = splitmix64_array(np.asarray(keys, dtype=np.uint64) ^ kk)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
