"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import ValidationError


def check_columns(X, names, *, positive=(), nonnegative=()):
    """Validate a 2-D float array whose columns are ``names``.

    A 1-D input is accepted when only one column is expected.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and len(names) == 1:
        X = X.reshape(-1, 1)
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != len(names):
        raise ValidationError(f"expected {len(names)} columns {tuple(names)}, got {X.shape[1]}")
    for i, name in enumerate(names):
        if name in positive and np.any(X[:, i] <= 0):
            raise ValidationError(f"column {name!r} must be positive")
        if name in nonnegative and np.any(X[:, i] < 0):
            raise ValidationError(f"column {name!r} must be non-negative")
    return X


def check_optional_positive(value, name):
    if value is not None and not value > 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return value
