"""Generators of stochastic matrices with an absorbing last state.

The transient part of a K-state generator has (K-1)^2 free nonnegative
off-diagonal intensities.  Coordinates are enumerated row-major, skipping
the diagonal, e.g. for K=4: (1,2),(1,3),(1,4),(2,1),(2,3),(2,4),(3,1),
(3,2),(3,4).  Exponentials of such generators are row-stochastic with
last row equal to the last unit vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

from .errors import ValidationError

# Defaults used across the library.
ROW_SUM_TOL = 1e-10          # internally produced matrices
PUBLISHED_TOL = 1e-3         # agency tables rounded to ~4 decimals
GENERATOR_ROW_SUM_TOL = 1e-12


def n_coords(k: int) -> int:
    if k < 2:
        raise ValidationError(f"rating count must be >= 2, got {k}")
    return (k - 1) ** 2


@dataclass(frozen=True)
class BasisIndexMap:
    """Canonical coordinate index <-> (row, col) map, 1-based pairs."""

    k: int
    pairs: tuple[tuple[int, int], ...]

    def index_of(self, row: int, col: int) -> int:
        """0-based coordinate index for a 1-based (row, col) pair."""
        return self.pairs.index((row, col))

    def labels(self) -> list[str]:
        return [f"{r}-{c}" for r, c in self.pairs]


@lru_cache(maxsize=None)
def basis_index_map(k: int) -> BasisIndexMap:
    """Row-major enumeration of off-diagonal intensities for rows 1..K-1."""
    if k < 2:
        raise ValidationError(f"rating count must be >= 2, got {k}")
    pairs = tuple(
        (row, col)
        for row in range(1, k)
        for col in range(1, k + 1)
        if col != row
    )
    assert len(pairs) == n_coords(k)
    return BasisIndexMap(k=k, pairs=pairs)


@lru_cache(maxsize=None)
def _coord_arrays(k: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based (rows, cols) index arrays matching basis_index_map order."""
    bim = basis_index_map(k)
    rows = np.array([r - 1 for r, _ in bim.pairs], dtype=np.intp)
    cols = np.array([c - 1 for _, c in bim.pairs], dtype=np.intp)
    return rows, cols


@dataclass(frozen=True)
class AlgebraCoeffs:
    """Nonnegative coordinates of a generator in the canonical basis."""

    k: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", c)
        if c.shape != (n_coords(self.k),):
            raise ValidationError(
                f"expected {n_coords(self.k)} coefficients, got shape {c.shape}"
            )
        if np.any(c < 0):
            raise ValidationError("generator coefficients must be nonnegative")


@dataclass(frozen=True)
class StochasticMatrix:
    """Row-stochastic K x K matrix with absorbing last state."""

    k: int
    entries: np.ndarray
    tol: float = field(default=ROW_SUM_TOL, compare=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", m)
        report = validate_stochastic(m, self.tol)
        if not report.passed:
            raise ValidationError(f"not a stochastic matrix: {report.summary()}")
        if m.shape[0] != self.k:
            raise ValidationError(f"dimension mismatch: k={self.k}, shape={m.shape}")


@dataclass(frozen=True)
class ValidationReport:
    """Report-only stochasticity check; never raises."""

    row_sum_dev: np.ndarray      # per-row |sum - 1|
    min_entry: float
    max_entry: float
    absorbing_dev: float         # max |last row - e_K|
    tol: float
    passed: bool

    def summary(self) -> str:
        return (
            f"max row-sum deviation {self.row_sum_dev.max():.3e}, "
            f"entries in [{self.min_entry:.3e}, {self.max_entry:.3e}], "
            f"absorbing-row deviation {self.absorbing_dev:.3e} (tol {self.tol:.1e})"
        )


def validate_stochastic(entries: np.ndarray, tol: float = ROW_SUM_TOL) -> ValidationReport:
    m = np.asarray(entries, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    k = m.shape[0]
    row_sum_dev = np.abs(m.sum(axis=1) - 1.0)
    e_k = np.zeros(k)
    e_k[-1] = 1.0
    absorbing_dev = float(np.abs(m[-1] - e_k).max())
    passed = bool(
        row_sum_dev.max() <= tol
        and m.min() >= -tol
        and m.max() <= 1.0 + tol
        and absorbing_dev <= tol
    )
    return ValidationReport(
        row_sum_dev=row_sum_dev,
        min_entry=float(m.min()),
        max_entry=float(m.max()),
        absorbing_dev=absorbing_dev,
        tol=tol,
        passed=passed,
    )


def coeffs_to_matrices(coeffs: np.ndarray, k: int) -> np.ndarray:
    """Assemble generators from coordinates; supports leading batch axes.

    coeffs: (..., (K-1)^2) nonnegative.  Returns (..., K, K) with exact
    zero row sums and zero last row.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.shape[-1] != n_coords(k):
        raise ValidationError(
            f"expected last axis {n_coords(k)}, got {c.shape[-1]}"
        )
    rows, cols = _coord_arrays(k)
    m = np.zeros(c.shape[:-1] + (k, k))
    m[..., rows, cols] = c
    diag = np.arange(k)
    m[..., diag, diag] = -m.sum(axis=-1)
    return m


def algebra_from_coeffs(c: AlgebraCoeffs) -> np.ndarray:
    return coeffs_to_matrices(c.coeffs, c.k)


# Pade-13 scaling-and-squaring constants (Higham 2005).
_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 5.371920351148152


def expm_batch(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a batch of small matrices.

    Pade-13 with per-matrix scaling-and-squaring; per-matrix scaling keeps
    results independent of how a batch is partitioned.
    """
    a = np.asarray(a, dtype=float)
    k = a.shape[-1]
    batch_shape = a.shape[:-2]
    flat = a.reshape((-1, k, k))
    norms = np.abs(flat).sum(axis=-2).max(axis=-1)  # 1-norms
    with np.errstate(divide="ignore"):
        s = np.ceil(np.log2(norms / _PADE13_THETA))
    s = np.where(np.isfinite(s), np.maximum(s, 0.0), 0.0).astype(np.int64)
    scaled = flat / (2.0 ** s)[:, None, None]

    ident = np.broadcast_to(np.eye(k), scaled.shape)
    b = _PADE13_B
    a2 = scaled @ scaled
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = scaled @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    )
    r = np.linalg.solve(v - u, v + u)

    smax = int(s.max(initial=0))
    for _ in range(smax):
        need = s > 0
        if not need.any():
            break
        r[need] = r[need] @ r[need]
        s = s - need
    return r.reshape(batch_shape + (k, k))


def mat_exp(a: np.ndarray) -> StochasticMatrix:
    """Exponential of a generator; checks the domain, returns a stochastic matrix."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    k = a.shape[0]
    row_sums = a.sum(axis=1)
    if np.abs(row_sums).max() > GENERATOR_ROW_SUM_TOL:
        raise ValidationError(
            f"generator row sums must vanish; max |sum| = {np.abs(row_sums).max():.3e}"
        )
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    if off.min() < 0:
        raise ValidationError("generator off-diagonal entries must be nonnegative")
    if np.abs(a[-1]).max() > GENERATOR_ROW_SUM_TOL:
        raise ValidationError("last generator row must be zero (absorbing default)")
    r = expm_batch(a[None])[0]
    # Clip harmless negative round-off before validating.
    r = np.clip(r, 0.0, None)
    r /= r.sum(axis=1, keepdims=True)
    r[-1] = 0.0
    r[-1, -1] = 1.0
    return StochasticMatrix(k=k, entries=r)


def ad(a: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Commutator [a, h] = a h - h a."""
    a = np.asarray(a, dtype=float)
    h = np.asarray(h, dtype=float)
    if a.shape != h.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {h.shape}")
    return a @ h - h @ a


def dexp_L(a: np.ndarray, h: np.ndarray, terms: int = 20) -> np.ndarray:
    """Truncated series sum_k ad_{-a}^k(h) / (k+1)!.

    Right-trivialized differential of exp at a; verification use only.
    """
    if terms < 1:
        raise ValidationError(f"terms must be >= 1, got {terms}")
    a = np.asarray(a, dtype=float)
    h = np.asarray(h, dtype=float)
    if a.shape != h.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {h.shape}")
    acc = np.zeros_like(h)
    term = h.copy()
    for j in range(terms):
        acc += term / math.factorial(j + 1)
        term = ad(-a, term)
    return acc
