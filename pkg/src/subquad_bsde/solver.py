"""Discretized solvers: backward regression sweep, Picard oracle, truncation ladder.

Both solvers discretize the same backward equation on a path bundle.  Per step
the noise coefficient is the martingale-increment estimator (regression of the
centered next value times the Brownian increment over dt), and the value update
is implicit in y.  The ladder solves the clamped problems along the diagonal
and the first row/column of the index lattice and counts order violations; the
theta residual forms the difference field the comparison argument contracts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import IterationLimitError, PreconditionViolationError, SolverDivergedError
from .generators import (Generator, TerminalData, TruncationIndex,
                         theta_difference_generator, truncate_generator, truncate_terminal)
from .paths import PathBundle, RegressionBasis, TimeGrid

_FP_TOL = 1e-10
_FP_MAX_ITER = 200


class _Projector:
    """Orthogonal projection onto the feature columns, factored once per step.

    SVD based so rank-deficient feature matrices (empty bins) project onto the
    true column span in the minimum-norm sense instead of failing.
    """

    def __init__(self, features: np.ndarray):
        u, s, vt = np.linalg.svd(features, full_matrices=False)
        keep = s > s[0] * max(features.shape) * np.finfo(float).eps if s[0] > 0 else s > -1.0
        self.u = u[:, keep]
        self.s = s[keep]
        self.vt = vt[keep]
        self.n_features = features.shape[1]

    def fit(self, values: np.ndarray) -> np.ndarray:
        return self.u @ (self.u.T @ values)

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        return self.vt.T @ ((self.u.T @ values) / self.s)


class _BinProjector:
    """Partition-basis projection: per-bin means, no factorization needed.

    Matches the minimum-norm least squares exactly (empty bins fit zero) at a
    fraction of the cost of an SVD on one-hot columns.
    """

    def __init__(self, idx: np.ndarray, size: int):
        self.idx = idx
        self.size = size
        self.counts = np.bincount(idx, minlength=size).astype(float)
        self.n_features = size

    def _means(self, col: np.ndarray) -> np.ndarray:
        sums = np.bincount(self.idx, weights=col, minlength=self.size)
        return sums / np.maximum(self.counts, 1.0)

    def fit(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            return self._means(values)[self.idx]
        out = np.empty_like(values)
        for c in range(values.shape[1]):
            out[:, c] = self._means(values[:, c])[self.idx]
        return out

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        return self._means(np.asarray(values, dtype=float))


@dataclass(frozen=True)
class SolutionField:
    """Discretized (Y, Z) on a path bundle; Y has N+1 nodes, Z has N steps.

    ``fit_noise`` is the accumulated standard error of the per-step value
    regressions from each node to the horizon: the honest statistical scale
    below which two fields on the same bundle cannot be distinguished.
    """

    Y: np.ndarray
    Z: np.ndarray
    grid: TimeGrid
    bundle: PathBundle
    basis: RegressionBasis
    method: str = "backward-regression"
    fit_noise: Optional[np.ndarray] = None

    def noise_scale(self) -> np.ndarray:
        if self.fit_noise is None:
            return np.zeros(self.grid.steps + 1)
        return self.fit_noise

    def summary(self) -> dict:
        """Per-node summary columns for the CSV report."""
        zn = np.sqrt((self.Z ** 2).sum(axis=2))
        zn = np.concatenate([zn, zn[:, -1:]], axis=1)   # carry last step to the horizon row
        return {
            "time": self.grid.nodes.copy(),
            "y_mean": self.Y.mean(axis=0),
            "y_q05": np.quantile(self.Y, 0.05, axis=0),
            "y_q95": np.quantile(self.Y, 0.95, axis=0),
            "z_norm_mean": zn.mean(axis=0),
        }


def _check_inputs(grid: TimeGrid, bundle: PathBundle) -> None:
    if not np.array_equal(grid.nodes, bundle.grid.nodes):
        raise ValueError("bundle was sampled on a different grid")


def _terminal_values(xi: TerminalData, bundle: PathBundle) -> np.ndarray:
    values = xi(bundle.terminal())
    if values.shape != (bundle.count,):
        raise ValueError("terminal data must produce one value per path")
    if not np.all(np.isfinite(values)):
        raise PreconditionViolationError("terminal values must be finite",
                                         np.flatnonzero(~np.isfinite(values))[:10].tolist())
    return values


def _projectors(grid: TimeGrid, bundle: PathBundle, basis: RegressionBasis) -> list:
    levels = bundle.levels()
    if basis.kind == "piecewise-constant-bins":
        return [_BinProjector(basis.bin_indices(levels[:, j, :]), basis.size)
                for j in range(grid.steps)]
    return [_Projector(basis.features(float(grid.nodes[j]), levels[:, j, :]))
            for j in range(grid.steps)]


def _z_step(proj: _Projector, y_next: np.ndarray, m_fit: np.ndarray,
            db: np.ndarray, dt: float) -> np.ndarray:
    # centered martingale-increment estimator: E_t[(Y_{t+dt} - E_t Y_{t+dt}) dB] / dt
    centered = y_next - m_fit
    return proj.fit(centered[:, None] * db) / dt


def _bin_implicit(g, t, b, m_fit, z, dt, basis) -> np.ndarray:
    """Exact implicit value update for the partition basis.

    On the fitted manifold every path of a bin shares one value c, so the
    update is a scalar root problem per bin: c = mean(Y_next) + dt * mean g(c).
    """
    from scipy.optimize import brentq

    idx = basis.bin_indices(b[:, :1])
    y = m_fit.copy()
    for bin_id in np.unique(idx):
        rows = np.flatnonzero(idx == bin_id)
        mb = float(m_fit[rows[0]])

        def resid(c):
            return mb + dt * float(np.mean(g(t, b[rows], np.full(len(rows), c), z[rows]))) - c

        radius = 1.0 + dt * abs(float(np.mean(g(t, b[rows], np.full(len(rows), mb), z[rows]))))
        lo, hi = mb - radius, mb + radius
        for _ in range(60):
            if resid(lo) >= 0.0 and resid(hi) <= 0.0:
                break
            radius *= 2.0
            lo, hi = mb - radius, mb + radius
        else:
            raise SolverDivergedError(-1, radius)
        y[rows] = brentq(resid, lo, hi, xtol=1e-12)
    return y


def solve_bounded(g: Generator, xi: TerminalData, grid: TimeGrid, bundle: PathBundle,
                  basis: RegressionBasis, fp_tol: float = _FP_TOL,
                  fp_max_iter: int = _FP_MAX_ITER) -> SolutionField:
    """Backward sweep for problems with bounded (e.g. truncated) data.

    Per step: Z from the centered martingale-increment regression, then the
    implicit value update y = fit(Y_next + g(t, y, Z) dt) iterated to ``fp_tol``
    with 0.5 damping whenever the iteration stops contracting.  Only sampled
    finiteness of the inputs is enforced; boundedness is the caller's contract.
    """
    _check_inputs(grid, bundle)
    levels = bundle.levels()
    M, N = bundle.count, grid.steps
    Y = np.empty((M, N + 1))
    Z = np.empty((M, N, bundle.dims))
    Y[:, N] = _terminal_values(xi, bundle)
    projs = _projectors(grid, bundle, basis)
    step_noise_sq = np.zeros(N)

    for j in reversed(range(N)):
        t = float(grid.nodes[j])
        dt = float(grid.dt[j])
        b = levels[:, j, :]
        db = bundle.increments[:, j, :]
        proj = projs[j]
        m_fit = proj.fit(Y[:, j + 1])
        Z[:, j, :] = _z_step(proj, Y[:, j + 1], m_fit, db, dt)

        y = m_fit.copy()
        prev_gap = math.inf
        for _ in range(fp_max_iter):
            gval = g(t, b, y, Z[:, j, :])
            if not np.all(np.isfinite(gval)):
                raise PreconditionViolationError(f"driver produced non-finite values at step {j}")
            y_new = m_fit + dt * proj.fit(gval)
            gap = float(np.max(np.abs(y_new - y)))
            if gap > 0.9 * prev_gap:
                # damp whenever the iteration stops contracting; steep drivers
                # near a kink otherwise ping-pong at constant amplitude
                y_new = 0.5 * (y_new + y)
                gap = float(np.max(np.abs(y_new - y)))
            y = y_new
            if gap < fp_tol:
                break
            prev_gap = gap
        else:
            if basis.kind != "piecewise-constant-bins":
                raise SolverDivergedError(j, gap)
            # partition basis: one scalar equation per bin, solved by a
            # bracketed root finder (robust against kink-induced cycles)
            y = _bin_implicit(g, t, b, m_fit, Z[:, j, :], dt, basis)
            gval = g(t, b, y, Z[:, j, :])
        Y[:, j] = y
        resid = Y[:, j + 1] + dt * gval - y     # spread the value fit had to average out
        step_noise_sq[j] = np.var(resid) * proj.n_features / M

    fit_noise = np.zeros(N + 1)
    fit_noise[:-1] = np.sqrt(np.cumsum(step_noise_sq[::-1])[::-1])
    return SolutionField(Y=Y, Z=Z, grid=grid, bundle=bundle, basis=basis,
                         method="backward-regression", fit_noise=fit_noise)


def picard_solve(g: Generator, xi: TerminalData, grid: TimeGrid, bundle: PathBundle,
                 basis: RegressionBasis, max_iter: int = 60,
                 tol: float = 1e-8) -> SolutionField:
    """Global Picard iteration: repeat linear backward passes with the driver frozen
    at the previous iterate until the sup-change over all nodes drops below ``tol``.

    Independent implementation used to cross-validate the implicit sweep on
    Lipschitz drivers; both discretizations share the same fixed point.
    """
    _check_inputs(grid, bundle)
    levels = bundle.levels()
    M, N = bundle.count, grid.steps
    xi_vals = _terminal_values(xi, bundle)
    projs = _projectors(grid, bundle, basis)

    Y = np.zeros((M, N + 1))
    Z = np.zeros((M, N, bundle.dims))
    Y[:, N] = xi_vals
    for j in reversed(range(N)):       # driver-free warm start
        m_fit = projs[j].fit(Y[:, j + 1])
        Y[:, j] = m_fit
        Z[:, j, :] = _z_step(projs[j], Y[:, j + 1], m_fit,
                             bundle.increments[:, j, :], float(grid.dt[j]))

    gap = math.inf
    step_noise_sq = np.zeros(N)
    for _ in range(max_iter):
        Y_new = np.empty_like(Y)
        Z_new = np.empty_like(Z)
        Y_new[:, N] = xi_vals
        for j in reversed(range(N)):
            t = float(grid.nodes[j])
            dt = float(grid.dt[j])
            proj = projs[j]
            frozen = g(t, levels[:, j, :], Y[:, j], Z[:, j, :])
            if not np.all(np.isfinite(frozen)):
                raise PreconditionViolationError(f"driver produced non-finite values at step {j}")
            m_fit = proj.fit(Y_new[:, j + 1])
            target = Y_new[:, j + 1] + dt * frozen
            Y_new[:, j] = proj.fit(target)
            Z_new[:, j, :] = _z_step(proj, Y_new[:, j + 1], m_fit,
                                     bundle.increments[:, j, :], dt)
            step_noise_sq[j] = np.var(target - Y_new[:, j]) * proj.n_features / M
        # the driver reads both fields, so both must settle
        gap = float(max(np.max(np.abs(Y_new - Y)), np.max(np.abs(Z_new - Z))))
        Y, Z = Y_new, Z_new
        if gap < tol:
            fit_noise = np.zeros(N + 1)
            fit_noise[:-1] = np.sqrt(np.cumsum(step_noise_sq[::-1])[::-1])
            return SolutionField(Y=Y, Z=Z, grid=grid, bundle=bundle, basis=basis,
                                 method="picard", fit_noise=fit_noise)
    raise IterationLimitError(max_iter, gap)


def consistency_residual(sol: SolutionField, g: Generator) -> np.ndarray:
    """Max fitted one-step residual per step: how far (Y, Z) are from the
    discrete equation after projecting onto the basis."""
    grid, bundle = sol.grid, sol.bundle
    levels = bundle.levels()
    out = np.empty(grid.steps)
    for j in range(grid.steps):
        t, dt = float(grid.nodes[j]), float(grid.dt[j])
        gval = g(t, levels[:, j, :], sol.Y[:, j], sol.Z[:, j, :])
        r = (sol.Y[:, j] - sol.Y[:, j + 1] - gval * dt
             + (sol.Z[:, j, :] * bundle.increments[:, j, :]).sum(axis=1))
        feats = sol.basis.features(t, levels[:, j, :])
        coef = np.linalg.lstsq(feats, r, rcond=None)[0]
        out[j] = float(np.max(np.abs(feats @ coef)))
    return out


# ---------------------------------------------------------------------------
# truncation ladder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LadderResult:
    final: SolutionField
    snapshots: dict                    # (n, q) -> float32 Y field
    violations: int
    comparisons: int
    diagonal_gaps: tuple               # sup |Y^{(k)} - Y^{(k-1)}| along the diagonal
    levels: tuple

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.comparisons if self.comparisons else 0.0


def _doubling_levels(top: int) -> list[int]:
    levels, n = [], 1
    while n < top:
        levels.append(n)
        n *= 2
    levels.append(top)
    return levels


def solve_ladder(g: Generator, xi: TerminalData, grid: TimeGrid, bundle: PathBundle,
                 basis: RegressionBasis, n_max: int = 16, q_max: int = 16,
                 levels: Optional[list[int]] = None,
                 order_tol: float = 1e-10) -> LadderResult:
    """Solve the clamped problems along the lattice diagonal and first row/column.

    Order counting: along the first row Y must be nondecreasing in n, along the
    first column nonincreasing in q.  The continuum comparison forces the
    ordering exactly; the regression fields can only be distinguished above
    their accumulated fit noise, so a comparison counts as violated when the
    ordering fails by more than 3x the combined per-node noise scale (plus
    ``order_tol`` * (1 + |Y|) for exact ties).
    """
    if levels is None:
        lv_n, lv_q = _doubling_levels(n_max), _doubling_levels(q_max)
    else:
        lv_n = lv_q = sorted(set(int(v) for v in levels))
    cache: dict[tuple[int, int], SolutionField] = {}

    def solved(n: int, q: int) -> SolutionField:
        if (n, q) not in cache:
            idx = TruncationIndex(n, q)
            cache[(n, q)] = solve_bounded(truncate_generator(g, idx),
                                          truncate_terminal(xi, idx), grid, bundle, basis)
        return cache[(n, q)]

    violations = comparisons = 0

    def count(low: SolutionField, high: SolutionField):
        # expects high.Y >= low.Y up to the statistical allowance
        nonlocal violations, comparisons
        allowance = 3.0 * (low.noise_scale() + high.noise_scale())[None, :]
        tol = allowance + order_tol * (1.0 + np.abs(high.Y))
        violations += int(np.sum(low.Y > high.Y + tol))
        comparisons += low.Y.size

    prev = None
    for n in lv_n:                                  # first row: increasing in n
        cur = solved(n, lv_q[0])
        if prev is not None:
            count(prev, cur)
        prev = cur
    prev = None
    for q in lv_q:                                  # first column: decreasing in q
        cur = solved(lv_n[0], q)
        if prev is not None:
            count(cur, prev)
        prev = cur

    gaps = []
    prev_diag = None
    for n, q in zip(lv_n, lv_q):
        cur = solved(n, q)
        if prev_diag is not None:
            # field distance per node (mean over paths), then sup over nodes
            gaps.append(float(np.max(np.mean(np.abs(cur.Y - prev_diag), axis=0))))
        prev_diag = cur.Y

    snapshots = {key: fieldY.Y.astype(np.float32) for key, fieldY in cache.items()}
    final = cache[(lv_n[-1], lv_q[-1])]
    return LadderResult(final=final, snapshots=snapshots, violations=violations,
                        comparisons=comparisons, diagonal_gaps=tuple(gaps),
                        levels=tuple(lv_n))


# ---------------------------------------------------------------------------
# theta residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaResidual:
    theta: float
    dU: np.ndarray
    dV: np.ndarray
    consistency: np.ndarray            # fitted one-step residual per step


def theta_residual(sol: SolutionField, sol_prime: SolutionField, theta: float,
                   g: Optional[Generator] = None,
                   g_prime: Optional[Generator] = None) -> ThetaResidual:
    """Difference field dU = (Y - theta Y')/(1-theta), dV likewise for Z.

    When both drivers are supplied, the pair is checked for one-step
    consistency against the theta-difference driver anchored at (Y', Z').
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if not np.array_equal(sol.grid.nodes, sol_prime.grid.nodes) or sol.Y.shape != sol_prime.Y.shape:
        raise ValueError("solutions must live on the same grid and bundle")
    dU = (sol.Y - theta * sol_prime.Y) / (1.0 - theta)
    dV = (sol.Z - theta * sol_prime.Z) / (1.0 - theta)
    if g is None or g_prime is None:
        return ThetaResidual(theta=theta, dU=dU, dV=dV, consistency=np.zeros(sol.grid.steps))

    dg = theta_difference_generator(g, g_prime, theta, sol.grid, sol_prime.Y, sol_prime.Z)
    grid, bundle = sol.grid, sol.bundle
    levels = bundle.levels()
    out = np.empty(grid.steps)
    for j in range(grid.steps):
        t, dt = float(grid.nodes[j]), float(grid.dt[j])
        dgval = dg(t, levels[:, j, :], dU[:, j], dV[:, j, :])
        r = (dU[:, j] - dU[:, j + 1] - dgval * dt
             + (dV[:, j, :] * bundle.increments[:, j, :]).sum(axis=1))
        feats = sol.basis.features(t, levels[:, j, :])
        coef = np.linalg.lstsq(feats, r, rcond=None)[0]
        out[j] = float(np.max(np.abs(feats @ coef)))
    return ThetaResidual(theta=theta, dU=dU, dV=dV, consistency=out)
