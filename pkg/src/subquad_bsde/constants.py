"""Explicit constants of the a-priori bounds, computed from (alpha, T, beta, gamma).

The bound constants grow like exp(mu(T) * k^(2/alpha*)) and overflow double
precision for mildly large coefficients, so they are carried as natural logs
(`LogValue`) and all comparisons downstream happen in log space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import InvalidCoefficientError

QUAD_ABS_TOL = 1e-10
QUAD_LIMIT = 200          # hard subdivision cap
_OVERFLOW_LOG = 700.0     # exp(x) overflows float64 just above this


@dataclass(frozen=True)
class LogValue:
    """A positive scalar stored as its natural log."""

    log: float

    @property
    def overflowed(self) -> bool:
        return self.log > _OVERFLOW_LOG

    @property
    def value(self) -> float:
        """Plain float; inf when the value does not fit in a double."""
        return math.inf if self.overflowed else math.exp(self.log)

    def __float__(self) -> float:
        return self.value


def _check_alpha(alpha: float) -> None:
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")


def conjugate_exponent(alpha: float) -> float:
    """alpha / (alpha - 1); satisfies 1/alpha + 1/alpha* = 1."""
    _check_alpha(alpha)
    return alpha / (alpha - 1.0)


def khat(alpha: float) -> float:
    """Weighted-Young coefficient: (2-alpha) * ((alpha-1)/alpha^2)^(-alpha/(2-alpha)).

    It certifies 2*g*y*|z|^alpha <= (1/alpha*) y^(2/alpha*) |z|^2
    + khat * g^(2/(2-alpha)) * y^2 for g, y, |z| >= 0.
    """
    _check_alpha(alpha)
    return (2.0 - alpha) * ((alpha - 1.0) / alpha ** 2) ** (-alpha / (2.0 - alpha))


def young_margin(alpha: float, gamma: np.ndarray, yhat: np.ndarray, znorm: np.ndarray) -> np.ndarray:
    """Pointwise slack of the inequality that ``khat`` certifies (>= 0 when it holds)."""
    astar = conjugate_exponent(alpha)
    kh = khat(alpha)
    gamma, yhat, znorm = (np.asarray(a, dtype=float) for a in (gamma, yhat, znorm))
    lhs = 2.0 * gamma * yhat * znorm ** alpha
    rhs = yhat ** (2.0 / astar) * znorm ** 2 / astar + kh * gamma ** (2.0 / (2.0 - alpha)) * yhat ** 2
    return rhs - lhs


def k_threshold(alpha: float) -> float:
    """((alpha*)^2 + alpha*)^(alpha*/2); chosen so k^(2/alpha*) >= 2 ln k."""
    astar = conjugate_exponent(alpha)
    return (astar ** 2 + astar) ** (astar / 2.0)


def _integrate(fn: Callable[[float], float], lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    val, _ = quad(fn, lo, hi, epsabs=QUAD_ABS_TOL, limit=QUAD_LIMIT)
    return val


def _probe_nonnegative(fn, hi: float, name: str) -> None:
    ts = np.linspace(0.0, hi, 257)
    vals = np.asarray([float(fn(t)) for t in ts])
    if np.any(vals < 0.0):
        t_bad = float(ts[int(np.argmin(vals))])
        raise InvalidCoefficientError(f"{name} must be nonnegative; {name}({t_bad:.6g}) = {vals.min():.6g}")


def beta_integral(beta: Callable[[float], float], s: float) -> float:
    """A(s) = integral of beta over [0, s], by adaptive quadrature."""
    if s < 0.0:
        raise ValueError("s must be nonnegative")
    _probe_nonnegative(beta, s, "beta")
    return _integrate(beta, 0.0, s)


def _cached_integral(integrand: Callable[[float], float]):
    """Integral from 0 to s with node caching; monotone in s for nonneg integrands."""
    cache: dict[float, float] = {0.0: 0.0}

    def value(s: float) -> float:
        s = float(s)
        if s not in cache:
            anchor = max((a for a in cache if a <= s), default=0.0)
            cache[s] = cache[anchor] + _integrate(integrand, anchor, s)
        return cache[s]

    return value


def mu_schedule(alpha: float, gamma: Callable[[float], float],
                A: Callable[[float], float], mu0: float = 1.0,
                weighted_integral: Callable[[float], float] | None = None) -> Callable[[float], float]:
    """mu(s) = mu0 * exp((khat/alpha*) * int_0^s e^{2A(r)} gamma^{2/(2-alpha)}(r) dr).

    ``weighted_integral``, when supplied, is a closed form for the inner
    integral as a function of s; use it when gamma^{2/(2-alpha)} has an
    integrable singularity the adaptive quadrature would chew on.
    """
    if mu0 < 1.0:
        raise ValueError("mu(0) must be >= 1")
    astar = conjugate_exponent(alpha)
    kh = khat(alpha)
    power = 2.0 / (2.0 - alpha)

    if weighted_integral is not None:
        grow = weighted_integral
    else:
        def integrand(r: float) -> float:
            g = float(gamma(r))
            if g < 0.0:
                raise InvalidCoefficientError(f"gamma must be nonnegative; gamma({r:.6g}) = {g:.6g}")
            return math.exp(2.0 * float(A(r))) * g ** power

        grow = _cached_integral(integrand)

    def mu(s: float) -> float:
        exponent = (kh / astar) * float(grow(s))
        # saturate rather than raise: downstream constants carry logs anyway
        return mu0 * math.exp(exponent) if exponent < _OVERFLOW_LOG else math.inf

    return mu


def bound_constant_K(alpha: float, T: float, beta, gamma, mu0: float = 1.0) -> LogValue:
    """K = exp(mu(T) k^{2/alpha*})  v  mu(T) e^{A(T)}, as a log-space value."""
    A_T = beta_integral(beta, T)
    mu = mu_schedule(alpha, gamma, lambda s: beta_integral(beta, s), mu0)
    mu_T = mu(T)
    k = k_threshold(alpha)
    astar = conjugate_exponent(alpha)
    left = mu_T * k ** (2.0 / astar)
    right = math.log(mu_T) + A_T
    return LogValue(max(left, right))


def bound_constant_Kp(p: float, alpha: float, T: float, beta, gamma, mu0: float = 1.0) -> LogValue:
    """Order-p version: ((p/(p-1))^p ((8 mu(T))^p e^{pA(T)} + 1) e^{p mu(T) k^{2/alpha*}}) v (p mu(T) e^{A(T)})."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    A_T = beta_integral(beta, T)
    mu = mu_schedule(alpha, gamma, lambda s: beta_integral(beta, s), mu0)
    mu_T = mu(T)
    k = k_threshold(alpha)
    astar = conjugate_exponent(alpha)
    log_bracket = np.logaddexp(p * (math.log(8.0 * mu_T) + A_T), 0.0)
    left = p * math.log(p / (p - 1.0)) + log_bracket + p * mu_T * k ** (2.0 / astar)
    right = math.log(p * mu_T) + A_T
    return LogValue(max(float(left), right))


def theta_constants(p: float, gamma, alpha: float, T: float,
                    concavity_grid: int = 2001) -> tuple[float, float]:
    """(delta_p, k_alpha) for the theta-difference moment step.

    delta_p = p * (int_0^T gamma)^{2/alpha*} and k_alpha = exp(alpha*/2).
    Also re-checks numerically that x -> (ln(k_alpha + x))^{alpha*/2} is
    concave on [0, 100], which is what makes k_alpha usable in the Jensen step.
    """
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    _check_alpha(alpha)
    _probe_nonnegative(gamma, T, "gamma")
    total = _integrate(gamma, 0.0, T)
    if not 0.0 < total < math.inf:
        raise InvalidCoefficientError(f"gamma must have a finite positive integral, got {total}")
    astar = conjugate_exponent(alpha)
    k_alpha = math.exp(astar / 2.0)
    delta_p = p * total ** (2.0 / astar)

    xs = np.linspace(0.0, 100.0, concavity_grid)
    f = np.log(k_alpha + xs) ** (astar / 2.0)
    second = f[2:] - 2.0 * f[1:-1] + f[:-2]
    if second.max() > 1e-9:
        raise AssertionError("concavity check failed for the Jensen transform")
    return delta_p, k_alpha


@dataclass(frozen=True)
class ConstantSet:
    """Every derived constant for a fixed (alpha, T, beta, gamma, mu0)."""

    alpha: float
    alpha_star: float
    k: float
    khat: float
    mu0: float
    A: Callable[[float], float]
    mu: Callable[[float], float]
    T: float
    log_K: LogValue
    K_p: Callable[[float], LogValue]
    delta_p: Callable[[float], float]
    k_alpha: float

    def psi(self, s: float, x) -> np.ndarray:
        """Test-surface exp(mu(s) x^{2/alpha*}) used by the pointwise bound."""
        x = np.asarray(x, dtype=float)
        return np.exp(self.mu(s) * x ** (2.0 / self.alpha_star))

    def yhat(self, s: float, y, f_running: float | np.ndarray = 0.0) -> np.ndarray:
        """Shifted magnitude e^{A(s)}|y| + k + accumulated weighted forcing."""
        y = np.asarray(y, dtype=float)
        return math.exp(self.A(s)) * np.abs(y) + self.k + np.asarray(f_running, dtype=float)

    def to_dict(self, p_values=(2.0,)) -> dict:
        out = {
            "alpha": self.alpha,
            "alpha_star": self.alpha_star,
            "k": self.k,
            "khat": self.khat,
            "mu0": self.mu0,
            "mu_T": self.mu(self.T),
            "A_T": self.A(self.T),
            "T": self.T,
            "log_K": self.log_K.log,
            "k_alpha": self.k_alpha,
        }
        for p in p_values:
            out[f"log_K_p[{p:g}]"] = self.K_p(p).log
            out[f"delta_p[{p:g}]"] = self.delta_p(p)
        return out

    def dump(self, p_values=(2.0,)) -> str:
        return json.dumps(self.to_dict(p_values), sort_keys=True, indent=2)


def derive_constants(alpha: float, T: float, beta, gamma, mu0: float = 1.0,
                     gamma_weighted_integral=None) -> ConstantSet:
    """Build the full `ConstantSet` for one coefficient profile.

    ``gamma_weighted_integral`` forwards a closed form for the mu-schedule's
    inner integral (singular gamma powers).
    """
    _check_alpha(alpha)
    if T <= 0.0:
        raise ValueError("T must be positive")
    _probe_nonnegative(beta, T, "beta")
    _probe_nonnegative(gamma, T, "gamma")
    astar = conjugate_exponent(alpha)
    A = _cached_integral(lambda r: float(beta(r)))
    mu = mu_schedule(alpha, gamma, A, mu0, weighted_integral=gamma_weighted_integral)
    mu_T, A_T = mu(T), A(T)
    k = k_threshold(alpha)
    log_K = LogValue(max(mu_T * k ** (2.0 / astar), math.log(mu_T) + A_T))

    def K_p(p: float) -> LogValue:
        if p <= 1.0:
            raise ValueError("p must exceed 1")
        log_bracket = float(np.logaddexp(p * (math.log(8.0 * mu_T) + A_T), 0.0))
        left = p * math.log(p / (p - 1.0)) + log_bracket + p * mu_T * k ** (2.0 / astar)
        return LogValue(max(left, math.log(p * mu_T) + A_T))

    def delta_p(p: float) -> float:
        return theta_constants(p, gamma, alpha, T)[0]

    return ConstantSet(alpha=alpha, alpha_star=astar, k=k, khat=khat(alpha), mu0=mu0,
                       A=A, mu=mu, T=T, log_K=log_K, K_p=K_p, delta_p=delta_p,
                       k_alpha=math.exp(astar / 2.0))
