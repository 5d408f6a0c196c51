"""Least-squares substrate: data container, OLS fits, projectors, test vectors.

Everything here goes through a thin QR factorization of the selected columns;
normal equations are never formed.  Subsets are tuples of 0-based column
indices into ``Dataset.X``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import qr, solve_triangular

from .errors import InputError, RankDeficiencyError, SaturatedModelError

RANK_RTOL = 1e-10

ModelSubset = tuple  # tuple[int, ...], strictly increasing


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response vector ``y`` and fixed design ``X`` with unique column labels."""

    y: np.ndarray
    X: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1:
            raise InputError(f"y must be one-dimensional, got shape {y.shape}")
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise InputError(f"X shape {X.shape} incompatible with y of length {y.shape[0]}")
        n, p = X.shape
        if n < 2 or p < 1:
            raise InputError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise InputError("y and X must contain only finite values")
        names = tuple(self.names) if len(self.names) else tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise InputError(f"{len(names)} column names for {p} columns")
        if len(set(names)) != p:
            dupes = sorted({nm for nm in names if names.count(nm) > 1})
            raise InputError(f"duplicate column names: {dupes}")
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InputError(f"unknown column {name!r}") from None

    def subset_names(self, subset: Sequence[int]) -> list:
        return [self.names[j] for j in subset]

    def content_hash(self) -> str:
        """SHA-256 over shapes, names and the raw float64 bytes of y and X."""
        h = hashlib.sha256()
        h.update(f"{self.n}x{self.p}".encode())
        for nm in self.names:
            h.update(nm.encode("utf-8") + b"\0")
        h.update(np.ascontiguousarray(self.y, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.X, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class FittedModel:
    subset: ModelSubset
    coefficients: np.ndarray
    rss: float
    df_resid: int


def check_subset(data: Dataset, subset: Sequence[int]) -> ModelSubset:
    """Validate and normalize a column subset to a sorted tuple."""
    idx = tuple(int(j) for j in subset)
    if not idx:
        raise InputError("model subset must be non-empty")
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise InputError(f"subset indices must be strictly increasing: {idx}")
    if idx[0] < 0 or idx[-1] >= data.p:
        raise InputError(f"subset {idx} out of bounds for p={data.p}")
    return idx


def _thin_qr(M: np.ndarray, labels: Sequence[str], ref_norms=None) -> tuple:
    Q, R = qr(M, mode="economic", check_finite=False)
    diag = np.abs(np.diag(R))
    norms = np.linalg.norm(M, axis=0) if ref_norms is None else ref_norms
    bad = [labels[k] for k in range(M.shape[1]) if not diag[k] > RANK_RTOL * max(norms[k], np.finfo(float).tiny)]
    if bad:
        raise RankDeficiencyError(
            f"design columns {bad} are (numerically) linearly dependent on earlier columns",
            columns=bad,
        )
    return Q, R


def _qr(data: Dataset, subset: ModelSubset) -> tuple:
    return _thin_qr(data.X[:, list(subset)], data.subset_names(subset))


def fit_ols(data: Dataset, subset: Sequence[int]) -> FittedModel:
    subset = check_subset(data, subset)
    Q, R = _qr(data, subset)
    qty = Q.T @ data.y
    coef = solve_triangular(R, qty, check_finite=False)
    resid = data.y - Q @ qty
    return FittedModel(
        subset=subset,
        coefficients=coef,
        rss=float(resid @ resid),
        df_resid=data.n - len(subset),
    )


def projection_matrix(data: Dataset, subset: Sequence[int]) -> np.ndarray:
    """Orthogonal projector onto the column space of ``X[:, subset]``."""
    subset = check_subset(data, subset)
    Q, _ = _qr(data, subset)
    P = Q @ Q.T
    # symmetrize away the last-bit asymmetry of the product
    return 0.5 * (P + P.T)


def test_vectors(data: Dataset, subset: Sequence[int]) -> np.ndarray:
    """All test vectors of a model at once, as the columns of an n x k matrix.

    Column j satisfies ``v_j' X_subset = e_j'``, so ``v_j' y`` is the j-th
    OLS coefficient.
    """
    subset = check_subset(data, subset)
    Q, R = _qr(data, subset)
    return solve_triangular(R, Q.T, check_finite=False).T


def test_vector(data: Dataset, subset: Sequence[int], j: int) -> np.ndarray:
    subset = check_subset(data, subset)
    if not 0 <= j < len(subset):
        raise InputError(f"coefficient position {j} out of range for a model with {len(subset)} columns")
    return test_vectors(data, subset)[:, j]


# keep pytest from collecting these when imported into test modules
test_vectors.__test__ = False
test_vector.__test__ = False


def reml_variance(data: Dataset, fit: FittedModel) -> float:
    if fit.df_resid < 1:
        raise SaturatedModelError(f"model {fit.subset} is saturated (n={data.n}), no residual variance")
    return fit.rss / fit.df_resid


def group_projection(data: Dataset, subset: Sequence[int], group: Sequence[int]) -> np.ndarray:
    """Projector onto the group columns residualized against the rest of the model."""
    subset = check_subset(data, subset)
    group = tuple(sorted(int(g) for g in group))
    if not group:
        raise InputError("group must be non-empty")
    if len(set(group)) != len(group) or not set(group) <= set(subset):
        raise InputError(f"group {group} is not a sub-list of the model {subset}")
    rest = tuple(j for j in subset if j not in group)
    if not rest:
        raise InputError("group equals the whole model; use projection_matrix for the full projector")
    Xg = data.X[:, list(group)]
    Xg_tilde = Xg - projection_matrix(data, rest) @ Xg
    # compare against the raw column norms so near-collinearity with the rest is caught
    Q, _ = _thin_qr(Xg_tilde, data.subset_names(group), np.linalg.norm(Xg, axis=0))
    P = Q @ Q.T
    return 0.5 * (P + P.T)
