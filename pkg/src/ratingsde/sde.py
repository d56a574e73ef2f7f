"""Coefficient SDEs in the generator cone and the group-valued rating process.

Each coordinate i of the generator follows the pathwise-increasing pair

    dA_i = |Y_i|^{a_i} dt,      dY_i = b_i dt + sigma_i dW_i,  Y_i(0) = y0_i,

with mutually independent Brownian drivers.  The rating matrix advances by
R_{k+1} = R_k exp(dA_k), which keeps every step row-stochastic with an
absorbing last state.  A measure change is a constant drift shift
b_i -> b_i + sigma_i * kappa_i with kappa derived from a per-rating vector h.

Reproducibility contract: the normal draw for (trajectory, coordinate,
step) comes from a counter-based stream keyed on (seed, trajectory index,
coordinate index), so results do not depend on scheduling or batch size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .lie import coeffs_to_matrices, expm_batch, n_coords, validate_stochastic

MEASURE_KINDS = ("historical", "jlt", "exponential")


@dataclass(frozen=True)
class TimeGrid:
    """Homogeneous grid on [0, horizon] with `steps` intervals."""

    horizon: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")
        if self.horizon <= 0:
            raise ValidationError(f"horizon must be positive, got {self.horizon}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Grid index of time t; raises if t is not a grid point."""
        idx = round(t / self.dt)
        if idx < 0 or idx > self.steps or abs(idx * self.dt - t) > tol:
            raise ValidationError(f"t={t} is not on the grid (dt={self.dt})")
        return int(idx)


# 120 steps per year resolves monthly checkpoints with margin.
DEFAULT_STEPS_PER_YEAR = 120


def default_grid(horizon: float = 1.0) -> TimeGrid:
    return TimeGrid(horizon=horizon, steps=max(1, round(DEFAULT_STEPS_PER_YEAR * horizon)))


@dataclass(frozen=True)
class SdeParams:
    """Per-coordinate (a, b, sigma) triples plus initial Y values."""

    k: int
    a: np.ndarray
    b: np.ndarray
    sigma: np.ndarray
    y0: np.ndarray | None = None

    def __post_init__(self):
        nc = n_coords(self.k)
        for name in ("a", "b", "sigma"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != (nc,):
                raise ValidationError(f"{name} must have shape ({nc},), got {arr.shape}")
            if np.any(arr < 0):
                raise ValidationError(f"{name} must be nonnegative")
        y0 = self.y0
        y0 = np.zeros(nc) if y0 is None else np.asarray(y0, dtype=float)
        if y0.shape != (nc,):
            raise ValidationError(f"y0 must have shape ({nc},), got {y0.shape}")
        object.__setattr__(self, "y0", y0)

    @classmethod
    def from_stacked(cls, k: int, p: np.ndarray) -> "SdeParams":
        """Unpack a flat optimizer vector [a..., b..., sigma...]."""
        nc = n_coords(k)
        p = np.asarray(p, dtype=float)
        if p.shape != (3 * nc,):
            raise ValidationError(f"expected {3 * nc} stacked parameters, got {p.shape}")
        return cls(k=k, a=p[:nc], b=p[nc:2 * nc], sigma=p[2 * nc:])

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.a, self.b, self.sigma])


@dataclass(frozen=True)
class MeasureChange:
    """A measure kind plus the per-rating vector h (h_K pinned to 1)."""

    kind: str
    h: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValidationError(f"kind must be one of {MEASURE_KINDS}, got {self.kind!r}")
        if self.h is not None:
            h = np.asarray(self.h, dtype=float)
            object.__setattr__(self, "h", h)
            if h.ndim != 1:
                raise ValidationError("h must be a vector")
            if h[-1] != 1.0:
                raise ValidationError(f"h_K must equal 1, got {h[-1]}")
            if self.kind == "exponential" and np.any(h == 0.0):
                raise ValidationError("exponential measure change requires h_i != 0")
        elif self.kind != "historical":
            raise ValidationError(f"kind {self.kind!r} requires an h vector")


HISTORICAL = MeasureChange(kind="historical")


def kappa_from_h(measure: MeasureChange, k: int) -> np.ndarray:
    """Girsanov kernel coordinates under the canonical basis ordering.

    Coordinate (i, j) maps to h_i for the per-row ("jlt") kind, to
    h_i / h_j for the ratio ("exponential") kind, and to 0 historically.
    """
    nc = n_coords(k)
    if measure.kind == "historical":
        return np.zeros(nc)
    h = measure.h
    if h is None or h.shape != (k,):
        raise ValidationError(f"h must have length {k}")
    from .lie import basis_index_map

    pairs = basis_index_map(k).pairs
    if measure.kind == "jlt":
        return np.array([h[i - 1] for i, _ in pairs])
    return np.array([h[i - 1] / h[j - 1] for i, j in pairs])


@dataclass
class MatrixPathBundle:
    """Simulated trajectories of the rating-matrix process.

    rpaths:       (M, N+1, K, K) matrices on the grid (R_0 = I), or None.
    increments:   (M, N, (K-1)^2) nonnegative per-step generator coordinates.
    ypaths:       (M, N+1, (K-1)^2) driver paths, or None.
    w_increments: (M, N, (K-1)^2) Brownian increments of the simulating
                  measure, or None.
    """

    k: int
    grid: TimeGrid
    params: SdeParams
    measure: MeasureChange
    seed: int
    m: int
    increments: np.ndarray
    rpaths: np.ndarray | None = None
    ypaths: np.ndarray | None = None
    w_increments: np.ndarray | None = None
    traj_offset: int = 0

    def require_rpaths(self) -> np.ndarray:
        if self.rpaths is None:
            raise ValidationError("bundle was simulated without stored matrix paths")
        return self.rpaths


def _stream(seed_words: list[int]) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_words)))


def draw_noise(k: int, grid: TimeGrid, m: int, seed: int,
               traj_offset: int = 0) -> np.ndarray:
    """Standard-normal tensor (M, N, ncoord); one stream per (trajectory, coordinate)."""
    nc = n_coords(k)
    z = np.empty((m, grid.steps, nc))
    for traj in range(m):
        for coord in range(nc):
            rng = _stream([seed, traj_offset + traj, coord])
            z[traj, :, coord] = rng.standard_normal(grid.steps)
    return z


def simulate_paths(params: SdeParams, measure: MeasureChange, grid: TimeGrid,
                   m: int, seed: int, noise: np.ndarray | None = None,
                   store_rpaths: bool = True, store_y: bool = True,
                   store_w: bool = True, traj_offset: int = 0) -> MatrixPathBundle:
    """Group-preserving Euler simulation of M rating-matrix trajectories.

    Per step: Y advances by an Euler step with the measure-shifted drift
    b + sigma * kappa; the generator increment uses the left endpoint,
    dA = |Y_k|^a dt; the matrix advances by R_{k+1} = R_k exp(dA).
    """
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    k = params.k
    nc = n_coords(k)
    n = grid.steps
    dt = grid.dt
    sqdt = np.sqrt(dt)

    if noise is None:
        noise = draw_noise(k, grid, m, seed, traj_offset)
    else:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != (m, n, nc):
            raise ValidationError(f"noise must have shape ({m},{n},{nc}), got {noise.shape}")

    kappa = kappa_from_h(measure, k)
    drift = params.b + params.sigma * kappa

    y = np.broadcast_to(params.y0, (m, nc)).copy()
    r = np.broadcast_to(np.eye(k), (m, k, k)).copy()

    increments = np.empty((m, n, nc))
    rpaths = np.empty((m, n + 1, k, k)) if store_rpaths else None
    ypaths = np.empty((m, n + 1, nc)) if store_y else None
    w_inc = noise * sqdt if store_w else None
    if rpaths is not None:
        rpaths[:, 0] = r
    if ypaths is not None:
        ypaths[:, 0] = y

    for step in range(n):
        da = np.abs(y) ** params.a * dt
        increments[:, step] = da
        r = r @ expm_batch(coeffs_to_matrices(da, k))
        r[:, -1, :] = 0.0            # keep the absorbing row exact
        r[:, -1, -1] = 1.0
        y = y + drift * dt + params.sigma * sqdt * noise[:, step]
        if rpaths is not None:
            rpaths[:, step + 1] = r
        if ypaths is not None:
            ypaths[:, step + 1] = y

    return MatrixPathBundle(
        k=k, grid=grid, params=params, measure=measure, seed=seed, m=m,
        increments=increments, rpaths=rpaths, ypaths=ypaths,
        w_increments=w_inc, traj_offset=traj_offset,
    )


def simulate_terminal(params: SdeParams, measure: MeasureChange, grid: TimeGrid,
                      m: int, seed: int, noise: np.ndarray | None = None) -> np.ndarray:
    """Terminal matrices R_T only, shape (M, K, K); used by calibration loops.

    Identical stepping to simulate_paths, without storing paths.
    """
    k = params.k
    nc = n_coords(k)
    n, dt = grid.steps, grid.dt
    sqdt = np.sqrt(dt)
    if noise is None:
        noise = draw_noise(k, grid, m, seed)
    kappa = kappa_from_h(measure, k)
    drift = params.b + params.sigma * kappa
    y = np.broadcast_to(params.y0, (m, nc)).copy()
    r = np.broadcast_to(np.eye(k), (m, k, k)).copy()
    for step in range(n):
        da = np.abs(y) ** params.a * dt
        r = r @ expm_batch(coeffs_to_matrices(da, k))
        r[:, -1, :] = 0.0            # keep the absorbing row exact
        r[:, -1, -1] = 1.0
        y = y + drift * dt + params.sigma * sqdt * noise[:, step]
    return r


def simulate_paths_threaded(params: SdeParams, measure: MeasureChange, grid: TimeGrid,
                            m: int, seed: int, threads: int = 1,
                            chunk: int = 256, **kwargs) -> MatrixPathBundle:
    """Chunk-parallel wrapper around simulate_paths.

    The chunk partition is fixed (independent of `threads`), and every
    trajectory draws from its own stream, so output is bit-identical for
    any thread count.
    """
    if threads <= 1 or m <= chunk:
        return simulate_paths(params, measure, grid, m, seed, **kwargs)

    from concurrent.futures import ThreadPoolExecutor

    offsets = list(range(0, m, chunk))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(
            lambda off: simulate_paths(params, measure, grid, min(chunk, m - off),
                                       seed, traj_offset=off, **kwargs),
            offsets,
        ))

    def cat(name):
        vals = [getattr(p, name) for p in parts]
        return None if vals[0] is None else np.concatenate(vals, axis=0)

    return MatrixPathBundle(
        k=params.k, grid=grid, params=params, measure=measure, seed=seed, m=m,
        increments=cat("increments"), rpaths=cat("rpaths"),
        ypaths=cat("ypaths"), w_increments=cat("w_increments"),
    )


def girsanov_density(kappa: np.ndarray, w_increments: np.ndarray, grid: TimeGrid) -> np.ndarray | float:
    """Radon-Nikodym density L_T for a constant kernel.

    L_T = exp(sum_i kappa_i W_T^i - |kappa|^2 T / 2), computed from stored
    increments of shape (N, ncoord) or batched (M, N, ncoord).
    """
    kappa = np.asarray(kappa, dtype=float)
    w = np.asarray(w_increments, dtype=float)
    if w.shape[-2] != grid.steps or w.shape[-1] != kappa.shape[0]:
        raise ValidationError(
            f"increments shape {w.shape} does not match grid steps {grid.steps} "
            f"and {kappa.shape[0]} coordinates"
        )
    wt = w.sum(axis=-2)
    log_l = wt @ kappa - 0.5 * float(kappa @ kappa) * grid.horizon
    out = np.exp(log_l)
    return float(out) if out.ndim == 0 else out


def mean_matrix(bundle: MatrixPathBundle, t: float) -> np.ndarray:
    """Elementwise sample mean of R_t across trajectories."""
    idx = bundle.grid.index_of(t)
    return bundle.require_rpaths()[:, idx].mean(axis=0)


def var_matrix(bundle: MatrixPathBundle, t: float) -> np.ndarray:
    """Elementwise unbiased sample variance of R_t across trajectories."""
    if bundle.m < 2:
        raise ValidationError("variance requires at least 2 trajectories")
    idx = bundle.grid.index_of(t)
    return bundle.require_rpaths()[:, idx].var(axis=0, ddof=1)


def check_bundle_stochastic(bundle: MatrixPathBundle, tol: float = 1e-9) -> bool:
    """True iff every stored matrix passes the stochasticity check at tol."""
    rp = bundle.require_rpaths()
    flat = rp.reshape(-1, bundle.k, bundle.k)
    for mat in flat:
        if not validate_stochastic(mat, tol).passed:
            return False
    return True
