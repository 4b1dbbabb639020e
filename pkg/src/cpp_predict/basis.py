"""Fixed basis expansions; the expanded matrix is used as an ordinary design."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import IllPosedBasis


@dataclass(frozen=True)
class BasisSpec:
    """Per-coordinate basis.

    ``kind`` is ``"identity"``, ``"polynomial"`` (intercept plus powers
    ``1..degree`` of each coordinate, no interactions) or ``"spline"``
    (polynomial part plus truncated powers ``(x - k)_+^degree`` at each knot).
    ``knots`` is either one sequence shared by all coordinates or a sequence
    of sequences, one per coordinate.
    """

    kind: str = "identity"
    degree: int = 1
    knots: tuple = field(default_factory=tuple)
    intercept: bool = True

    def __post_init__(self):
        if self.kind not in ("identity", "polynomial", "spline"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind != "identity" and self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.kind == "spline" and len(self.knots) == 0:
            raise ValueError("spline basis needs at least one knot")


def _knots_for(spec, j, q):
    knots = spec.knots
    if len(knots) and np.ndim(knots[0]) > 0:
        if len(knots) != q:
            raise ValueError(f"got knot lists for {len(knots)} coordinates, data has {q}")
        return np.asarray(knots[j], dtype=float)
    return np.asarray(knots, dtype=float)


def basis_expand(X_raw, basis: BasisSpec) -> np.ndarray:
    X = np.asarray(X_raw, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, q = X.shape
    if basis.kind == "identity":
        return X.copy()
    cols = [np.ones(n)] if basis.intercept else []
    for j in range(q):
        x = X[:, j]
        cols.extend(x**k for k in range(1, basis.degree + 1))
        if basis.kind == "spline":
            for kn in _knots_for(basis, j, q):
                cols.append(np.maximum(x - kn, 0.0) ** basis.degree)
    Z = np.column_stack(cols)
    if Z.shape[1] > n:
        warnings.warn(f"{Z.shape[1]} basis functions for {n} observations", IllPosedBasis, stacklevel=2)
    return Z
