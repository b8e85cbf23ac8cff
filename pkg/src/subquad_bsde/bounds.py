"""Numerical verification of the a-priori moment bounds and the comparison order.

All expectations of exponentially large quantities are carried in log space;
nothing here ever materializes exp(x) for x > 700.  Where a bound's right side
involves E_t[exp(L)] with huge L, the check substitutes the conditional Jensen
minorant exp(E_t[L]): passing against the minorant certifies the original
inequality a fortiori, and the capping of L at 700 only ever weakens our side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import PreconditionViolationError
from .paths import regress_conditional

_LOG_CAP = 700.0


def log_mean_exp(logs: np.ndarray) -> tuple[float, float]:
    """(log of the sample mean of exp(logs), relative standard error)."""
    logs = np.asarray(logs, dtype=float)
    top = float(logs.max())
    w = np.exp(logs - top)
    mean_w = float(w.mean())
    n = len(logs)
    se_rel = float(w.std(ddof=1) / (mean_w * math.sqrt(n))) if n > 1 else 0.0
    return top + math.log(mean_w), se_rel


@dataclass(frozen=True)
class MomentEstimate:
    """Monte Carlo moment carried as a log-value with a relative standard error."""

    log_value: float
    se_rel: float
    p: float
    transform: str = ""
    heavy_tail: bool = False

    def __post_init__(self):
        if self.se_rel < 0.0:
            raise ValueError("standard error must be nonnegative")

    @property
    def overflowed(self) -> bool:
        return self.log_value > _LOG_CAP

    @property
    def value(self) -> float:
        return math.inf if self.overflowed else math.exp(self.log_value)

    @property
    def standard_error(self) -> float:
        return math.inf if self.overflowed else self.se_rel * self.value


@dataclass(frozen=True)
class BoundCheckResult:
    bound_id: str
    times: np.ndarray
    log_lhs: np.ndarray          # per checked time, at the tightest path
    log_rhs: np.ndarray
    se: np.ndarray               # combined log-scale standard error per time
    margin_min: np.ndarray       # min over paths of log_rhs - log_lhs
    margin_median: np.ndarray
    verdict: str                 # satisfied | violated | indeterminate
    violation_fraction: float = 0.0
    worst_gap: float = 0.0

    @property
    def satisfied(self) -> bool:
        return self.verdict == "satisfied"


def _classify(margins: np.ndarray, ses: np.ndarray) -> str:
    worst = float(np.min(margins))
    se_at = float(ses[int(np.argmin(margins))])
    if worst < -3.0 * se_at:
        return "violated"
    if worst < 0.0 or se_at > 0.5 * abs(worst):
        return "indeterminate"
    return "satisfied"


# ---------------------------------------------------------------------------
# the shifted forcing process
# ---------------------------------------------------------------------------

def fhat_process(profile, sol_prime) -> np.ndarray:
    """f + beta|Y'| + gamma [ln(e+|Z'|)]^{alpha*/2} on the step-left nodes, (M, N).

    Coefficients come from the profile's convexity tier: this is the shifted
    forcing of the comparison argument, whose hypothesis carries that tier.
    """
    grid, bundle = sol_prime.grid, sol_prime.bundle
    f_fn, beta_fn, gamma_fn = profile.convexity_tier()
    levels = bundle.levels()
    half = profile.alpha_star / 2.0
    out = np.empty((bundle.count, grid.steps))
    for j in range(grid.steps):
        t = float(grid.nodes[j])
        zn = np.sqrt((sol_prime.Z[:, j, :] ** 2).sum(axis=1))
        out[:, j] = (f_fn(t, levels[:, j, :])
                     + beta_fn(t) * np.abs(sol_prime.Y[:, j])
                     + gamma_fn(t) * np.log(math.e + zn) ** half)
    if np.any(out < 0.0):
        raise ValueError("forcing process must be nonnegative")
    return out


@dataclass(frozen=True)
class FhatMomentCheck:
    moment: MomentEstimate
    ln_moment: Optional[MomentEstimate] = None
    jensen_majorant: Optional[MomentEstimate] = None
    jensen_consistent: Optional[bool] = None


def verify_fhat_moment(fhat: np.ndarray, grid, p: float, alpha_star: float,
                       gamma: Optional[Callable] = None,
                       z_prime: Optional[np.ndarray] = None) -> FhatMomentCheck:
    """Estimate E[exp(p (int fhat dt)^{2/alpha*})], optionally with the Jensen cross-check.

    With ``gamma`` and ``z_prime`` supplied, also estimates the log-term moment
    and its concavity majorant E[(k_alpha + int |Z'| dmu)^{delta_p}] under the
    normalized measure dmu = gamma dt / int gamma, and reports whether the
    estimated ordering is consistent within 3 standard errors.
    """
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    fhat = np.asarray(fhat, dtype=float)
    dt = grid.dt
    integral = fhat @ dt
    log_m, se_m = log_mean_exp(p * integral ** (2.0 / alpha_star))
    moment = MomentEstimate(log_m, se_m, p, transform="exp(p*(int fhat)^(2/a*))")
    if gamma is None or z_prime is None:
        return FhatMomentCheck(moment=moment)

    half = alpha_star / 2.0
    gvals = np.asarray([float(gamma(t)) for t in grid.nodes[:-1]])
    weights = gvals * dt
    total = float(weights.sum())
    if not 0.0 < total < math.inf:
        from .errors import InvalidCoefficientError
        raise InvalidCoefficientError(f"Jensen majorant needs 0 < int(gamma) < inf, got {total}")
    zn = np.sqrt((np.asarray(z_prime, dtype=float) ** 2).sum(axis=2))
    ln_int = (np.log(math.e + zn) ** half) @ weights
    log_ln, se_ln = log_mean_exp(p * ln_int ** (2.0 / alpha_star))
    ln_moment = MomentEstimate(log_ln, se_ln, p, transform="exp(p*(int gamma*ln-term)^(2/a*))")

    k_alpha = math.exp(alpha_star / 2.0)
    delta_p = p * total ** (2.0 / alpha_star)
    w = (zn @ weights) / total
    log_mj, se_mj = log_mean_exp(delta_p * np.log(k_alpha + w))
    majorant = MomentEstimate(log_mj, se_mj, p, transform="(k_alpha + int|Z'|dmu)^delta_p")
    slack = 3.0 * math.hypot(se_ln, se_mj)
    return FhatMomentCheck(moment=moment, ln_moment=ln_moment, jensen_majorant=majorant,
                           jensen_consistent=bool(log_ln <= log_mj + slack))


# ---------------------------------------------------------------------------
# pointwise and sup bounds
# ---------------------------------------------------------------------------

def _decile_indices(grid) -> np.ndarray:
    targets = np.linspace(0.0, 0.9, 10) * grid.horizon
    idx = np.unique([int(np.argmin(np.abs(grid.nodes - s))) for s in targets])
    return idx[idx < grid.steps]


def _tail_forcing(f_process, grid, levels) -> np.ndarray:
    """Per-path cumulative forcing integrals int_{t_j}^T f ds, shape (M, N+1)."""
    M = levels.shape[0]
    vals = np.empty((M, grid.steps))
    for j in range(grid.steps):
        vals[:, j] = np.asarray(f_process(float(grid.nodes[j]), levels[:, j, :]), dtype=float)
    tail = np.zeros((M, grid.steps + 1))
    tail[:, :-1] = np.cumsum((vals * grid.dt[None, :])[:, ::-1], axis=1)[:, ::-1]
    return tail


def _fit_se(targets: np.ndarray, fitted: np.ndarray, n_features: int) -> float:
    resid = targets - fitted
    n = len(targets)
    return float(np.std(resid) * math.sqrt(max(n_features, 1) / n))


def verify_pointwise_bound(sol, constants, xi_values: np.ndarray, f_process,
                           variant: str = "two-sided") -> BoundCheckResult:
    """Conditional bound exp(|Y_t|^{2/a*}) + E_t[int_t^T |Z|^2] <= K E_t[exp(K(|xi|+int f)^{2/a*})].

    ``variant`` ``one-sided`` replaces |Y| by Y+, gates the quadratic variation
    by {Y > 0}, and uses xi+ on the right.  Conditional expectations are the
    solver's regression proxies at decile times; the right side is lowered to
    its conditional Jensen minorant, so a satisfied verdict is conservative.
    """
    if variant not in ("two-sided", "one-sided"):
        raise ValueError(f"unknown variant {variant!r}")
    grid, bundle, basis = sol.grid, sol.bundle, sol.basis
    levels = bundle.levels()
    one_sided = variant == "one-sided"
    power = 2.0 / constants.alpha_star
    log_K = constants.log_K.log
    K_float = math.exp(min(log_K, _LOG_CAP))

    xi_eff = np.maximum(xi_values, 0.0) if one_sided else np.abs(xi_values)
    tail_f = _tail_forcing(f_process, grid, levels)
    zsq = (sol.Z ** 2).sum(axis=2) * grid.dt[None, :]
    if one_sided:
        zsq = zsq * (sol.Y[:, :-1] > 0.0)
    tail_q = np.zeros((bundle.count, grid.steps + 1))
    tail_q[:, :-1] = np.cumsum(zsq[:, ::-1], axis=1)[:, ::-1]

    idx = _decile_indices(grid)
    times, lhs_t, rhs_t, se_t, mmin, mmed = [], [], [], [], [], []
    for j in idx:
        t = float(grid.nodes[j])
        feats = basis.features(t, levels[:, j, :])
        _, q_fit = regress_conditional(tail_q[:, j], feats)
        q_fit = np.maximum(q_fit, 0.0)
        se_q = _fit_se(tail_q[:, j], q_fit, feats.shape[1])
        y = sol.Y[:, j]
        ypart = np.maximum(y, 0.0) ** power if one_sided else np.abs(y) ** power
        log_lhs = np.logaddexp(ypart, np.log(np.maximum(q_fit, 1e-300)))

        big = np.minimum(K_float * (xi_eff + tail_f[:, j]) ** power, _LOG_CAP)
        _, big_fit = regress_conditional(big, feats)
        se_big = _fit_se(big, big_fit, feats.shape[1])
        log_rhs = log_K + big_fit

        margins = log_rhs - log_lhs
        se_lhs = se_q / np.maximum(np.exp(log_lhs), 1e-300)   # d(log)/dQ * se
        se_comb = np.sqrt(se_lhs ** 2 + se_big ** 2)
        worst = int(np.argmin(margins))
        times.append(t)
        lhs_t.append(float(log_lhs[worst]))
        rhs_t.append(float(log_rhs[worst]))
        se_t.append(float(se_comb[worst]))
        mmin.append(float(margins.min()))
        mmed.append(float(np.median(margins)))

    verdict = _classify(np.asarray(mmin), np.asarray(se_t))
    return BoundCheckResult(bound_id=f"pointwise-{variant}", times=np.asarray(times),
                            log_lhs=np.asarray(lhs_t), log_rhs=np.asarray(rhs_t),
                            se=np.asarray(se_t), margin_min=np.asarray(mmin),
                            margin_median=np.asarray(mmed), verdict=verdict,
                            worst_gap=float(np.min(mmin)))


def verify_sup_bound(sol, constants, xi_values: np.ndarray, f_process,
                     p: float = 2.0) -> BoundCheckResult:
    """Unconditional bound E[exp(p sup|Y|^{2/a*})] + E[(int|Z|^2)^{p/2}] <= K_p E[exp(K_p (|xi|+int f)^{2/a*})]."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    grid, bundle = sol.grid, sol.bundle
    levels = bundle.levels()
    power = 2.0 / constants.alpha_star
    log_Kp = constants.K_p(p).log
    Kp_float = math.exp(min(log_Kp, _LOG_CAP))
    tail_f = _tail_forcing(f_process, grid, levels)
    zsq = (sol.Z ** 2).sum(axis=2) * grid.dt[None, :]

    half_idx = int(np.argmin(np.abs(grid.nodes - 0.5 * grid.horizon)))
    times, lhs_t, rhs_t, se_t, mmin = [], [], [], [], []
    for j in (0, half_idx):
        t = float(grid.nodes[j])
        sup_y = np.abs(sol.Y[:, j:]).max(axis=1)
        log_a, se_a = log_mean_exp(p * sup_y ** power)
        q = zsq[:, j:].sum(axis=1)
        qp = q ** (p / 2.0)
        mean_qp = float(qp.mean())
        se_b_rel = float(qp.std(ddof=1) / (max(mean_qp, 1e-300) * math.sqrt(len(qp))))
        log_b = math.log(max(mean_qp, 1e-300))
        log_lhs = float(np.logaddexp(log_a, log_b))
        wa, wb = math.exp(log_a - log_lhs), math.exp(log_b - log_lhs)
        se_lhs = math.hypot(wa * se_a, wb * se_b_rel)

        big = np.minimum(Kp_float * (np.abs(xi_values) + tail_f[:, j]) ** power, _LOG_CAP)
        log_rhs_mean, se_rhs = log_mean_exp(big)
        log_rhs = log_Kp + log_rhs_mean

        times.append(t)
        lhs_t.append(log_lhs)
        rhs_t.append(log_rhs)
        se_t.append(math.hypot(se_lhs, se_rhs))
        mmin.append(log_rhs - log_lhs)

    verdict = _classify(np.asarray(mmin), np.asarray(se_t))
    return BoundCheckResult(bound_id=f"sup-p{p:g}", times=np.asarray(times),
                            log_lhs=np.asarray(lhs_t), log_rhs=np.asarray(rhs_t),
                            se=np.asarray(se_t), margin_min=np.asarray(mmin),
                            margin_median=np.asarray(mmin), verdict=verdict,
                            worst_gap=float(np.min(mmin)))


# ---------------------------------------------------------------------------
# comparison order
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonPolicy:
    """Nodewise slack Y <= Y' + c * sqrt(dt) + regression noise proxy + extra."""

    c: float = 0.5
    extra: float = 0.0
    use_fit_noise: bool = True
    max_violation_fraction: float = 0.005


def verify_comparison(sol, sol_prime, policy: ComparisonPolicy = ComparisonPolicy(),
                      xi_values: Optional[np.ndarray] = None,
                      xi_prime_values: Optional[np.ndarray] = None) -> BoundCheckResult:
    """Check the pathwise order Y <= Y' + eps on every grid node.

    eps combines the discretization allowance c * sqrt(dt) with the solvers'
    accumulated regression noise.  The caller asserts the hypothesis pattern;
    when terminal samples are supplied they are validated first and an order
    violation there raises with witness paths.
    """
    if sol.grid is not sol_prime.grid and not np.array_equal(sol.grid.nodes, sol_prime.grid.nodes):
        raise ValueError("solutions must share one grid")
    if sol.Y.shape != sol_prime.Y.shape:
        raise ValueError("solutions must share one path bundle")
    if xi_values is not None and xi_prime_values is not None:
        bad = np.flatnonzero(xi_values > xi_prime_values + 1e-12)
        if bad.size:
            witnesses = [(int(i), float(xi_values[i]), float(xi_prime_values[i])) for i in bad[:10]]
            raise PreconditionViolationError(
                f"terminal ordering xi <= xi' fails on {bad.size} paths", witnesses)

    eps = np.full(sol.grid.steps + 1, policy.c * math.sqrt(float(np.max(sol.grid.dt))) + policy.extra)
    if policy.use_fit_noise:
        eps = eps + 3.0 * (sol.noise_scale() + sol_prime.noise_scale())
    gap = sol.Y - sol_prime.Y          # should be <= eps everywhere
    violations = gap > eps[None, :]
    fraction = float(violations.mean())
    worst = float(gap.max())
    per_time = violations.mean(axis=0)
    verdict = "satisfied" if fraction <= policy.max_violation_fraction else "violated"
    margins = eps - gap.max(axis=0)
    return BoundCheckResult(bound_id="comparison", times=sol.grid.nodes.copy(),
                            log_lhs=gap.max(axis=0), log_rhs=eps,
                            se=per_time, margin_min=margins,
                            margin_median=np.median(eps[None, :] - gap, axis=0),
                            verdict=verdict, violation_fraction=fraction, worst_gap=worst)
