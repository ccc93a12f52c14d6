"""Input validation helpers shared by the estimators and the CLI."""

from numbers import Integral, Real

import numpy as np


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`.

    ``None`` gives a fresh unseeded generator, an int seeds a new one and an
    existing generator is passed through unchanged.
    """
    if seed is None or isinstance(seed, (Integral, np.integer)):
        return np.random.default_rng(seed)
    if isinstance(seed, np.random.Generator):
        return seed
    raise ValueError(f"{seed!r} cannot be used to seed a numpy Generator")


def check_rho(rho):
    if not isinstance(rho, Real) or not 0.0 <= float(rho) <= 1.0:
        raise ValueError(f"rho must be a real number in [0, 1], got {rho!r}")
    return float(rho)


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, (Integral, np.integer)) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_label_set(labels):
    """Normalize ``labels`` into a sorted tuple of distinct class ids."""
    if isinstance(labels, (str, bytes)):
        raise TypeError("labels must be an iterable of integers")
    out = set()
    for lab in labels:
        if isinstance(lab, bool) or not isinstance(lab, (Integral, np.integer)):
            raise TypeError(f"class ids must be integers, got {lab!r}")
        if lab < 0:
            raise ValueError(f"class ids must be nonnegative, got {lab}")
        out.add(int(lab))
    if not out:
        raise ValueError("a sample needs at least one label")
    return tuple(sorted(out))


def check_batch(batch):
    """Return ``batch`` as a list, verifying that it only holds samples."""
    from .core import Sample

    batch = list(batch)
    for s in batch:
        if not isinstance(s, Sample):
            raise TypeError(f"expected Sample, got {type(s).__name__}")
    return batch


def pad(vec, n):
    """Zero-extend a 1-d array to length ``n``."""
    vec = np.asarray(vec)
    if vec.shape[0] >= n:
        return vec
    return np.concatenate([vec, np.zeros(n - vec.shape[0], dtype=vec.dtype)])
