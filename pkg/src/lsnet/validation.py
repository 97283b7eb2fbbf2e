"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numbers

import numpy as np

from .encoding import EncodingOperator
from .exceptions import DimensionError, ParameterError
from .phantom import Sample

__all__ = ["check_complex_array", "check_positive", "check_problems", "check_targets"]


def check_complex_array(a, name="array", ndim=None, shape=None) -> np.ndarray:
    """Finite complex128 copy-free view of ``a`` with optional rank/shape checks."""
    arr = np.asarray(a)
    if arr.dtype.kind not in "biufc":
        raise ParameterError(f"{name} must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(np.complex128, copy=False)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"{name} must have {ndim} dims, got {arr.ndim}")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains NaN or Inf")
    return arr


def check_positive(value, name, allow_zero=False) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ParameterError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        raise ParameterError(f"{name} must be {'>=' if allow_zero else '>'} 0, got {value}")
    return float(value)


def check_problems(X) -> list:
    """Normalize a batch of reconstruction problems to ``[(y, op), ...]``.

    Entries may be :class:`Sample` objects or ``(y, op)`` pairs.
    """
    if isinstance(X, Sample) or (isinstance(X, tuple) and len(X) == 2
                                 and isinstance(X[1], EncodingOperator)):
        raise ParameterError("expected a sequence of problems, got a single one")
    out = []
    for i, item in enumerate(X):
        if isinstance(item, Sample):
            y, op = item.y, item.op
        else:
            try:
                y, op = item
            except (TypeError, ValueError) as e:
                raise ParameterError(f"problem {i} must be a Sample or a (y, op) pair") from e
        if not isinstance(op, EncodingOperator):
            raise ParameterError(f"problem {i}: operator must be an EncodingOperator")
        out.append((check_complex_array(y, f"y[{i}]", shape=op.kspace_shape), op))
    if not out:
        raise ParameterError("no problems given")
    return out


def check_targets(X, targets, problems) -> list:
    """Reference images from ``targets`` or, when omitted, from ``Sample.x_ref``."""
    if targets is None:
        if not all(isinstance(item, Sample) for item in X):
            raise ParameterError("targets are required unless every problem is a Sample")
        targets = [item.x_ref for item in X]
    targets = list(targets)
    if len(targets) != len(problems):
        raise DimensionError(f"{len(targets)} targets for {len(problems)} problems")
    return [check_complex_array(t, f"target[{i}]", shape=op.image_shape)
            for i, (t, (_, op)) in enumerate(zip(targets, problems))]
