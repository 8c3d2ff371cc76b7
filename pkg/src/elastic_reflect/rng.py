"""Per-path random streams.

Each ``(seed, path_index)`` pair owns an independent Philox stream (a
counter-based generator), so a path's draws never depend on how paths are
scheduled across workers.
"""
from __future__ import annotations

import numpy as np

from .errors import ValidationError

_MASK64 = (1 << 64) - 1


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    if seed < 0 or path_index < 0:
        raise ValidationError("seed and path_index must be non-negative")
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(path_index) & _MASK64,))
    return np.random.Generator(np.random.Philox(ss))


def path_noise(seed: int, path_index: int, n_steps: int):
    """Standard normals and uniforms on ``(0, 1]`` for one path, in that draw order."""
    rng = path_generator(seed, path_index)
    z = rng.standard_normal(n_steps)
    u = 1.0 - rng.random(n_steps)
    return z, u


def batch_noise(seed: int, path_indices, n_steps: int):
    """Stack :func:`path_noise` over ``path_indices``; rows are paths."""
    path_indices = list(path_indices)
    z = np.empty((len(path_indices), n_steps))
    u = np.empty((len(path_indices), n_steps))
    for row, idx in enumerate(path_indices):
        z[row], u[row] = path_noise(seed, idx, n_steps)
    return z, u
