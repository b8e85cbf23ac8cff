"""Generator model: coefficient profiles, evaluatable drivers, and transforms.

A `Generator` evaluates g(omega, t, y, z) vectorized over paths; the omega
dependence is restricted to the simulated Brownian value at time t, which is
passed in as the ``b`` argument.  The attached `CoefficientProfile` carries
the structural growth/convexity coefficients under which the generator's
declared conditions hold; the condition checkers read them from there.

For the two builtin examples the profile coefficients are not the raw
multipliers from the formulas: they are assembled piece by piece from the
envelope lemmas (band constructions) and the convexity closure rules, so that
the extended-convexity inequalities hold with certified margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid

from .constants import conjugate_exponent
from .errors import InvalidCoefficientError
from .expressions import compile_expression

TimeFn = Callable[[float], float]


def _const(value: float) -> TimeFn:
    return lambda t: value + 0.0 * np.asarray(t, dtype=float)


def _as_time_fn(c) -> TimeFn:
    return c if callable(c) else _const(float(c))


@dataclass(frozen=True)
class CoefficientProfile:
    """Time-varying data governing a generator's declared growth conditions.

    ``f`` is a nonnegative forcing process evaluated per path: f(t, b) with b
    the Brownian values at time t, shape (n, d).  ``beta``/``gamma`` are the
    growth coefficients; ``psi_growth``/``c_quad`` feed the general-growth
    check; the optional u ... c_bar functions and the band radius ``a`` feed
    the finer regularity checks when the generator declares them.
    """

    alpha: float
    beta: TimeFn
    gamma: TimeFn
    f: Callable
    psi_growth: Callable = lambda u: np.asarray(u, dtype=float)
    c_quad: float = 1.0
    u: Optional[TimeFn] = None
    v: Optional[TimeFn] = None
    k1: Optional[TimeFn] = None
    k2: Optional[TimeFn] = None
    c1: Optional[TimeFn] = None
    c2: Optional[TimeFn] = None
    c3: Optional[TimeFn] = None
    u_bar: Optional[TimeFn] = None
    v_bar: Optional[TimeFn] = None
    c_bar: Optional[TimeFn] = None
    a: float = 0.0
    # extended-convexity tier: the theta-difference inequalities may only be
    # certifiable with larger coefficients than the one-sided growth needs;
    # keeping them separate keeps the derived bound constants meaningful
    f_conv: Optional[Callable] = None
    beta_conv: Optional[TimeFn] = None
    gamma_conv: Optional[TimeFn] = None

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")

    @property
    def alpha_star(self) -> float:
        return conjugate_exponent(self.alpha)

    def convexity_tier(self):
        """(f, beta, gamma) used by the theta-difference checks."""
        return (self.f_conv or self.f, self.beta_conv or self.beta,
                self.gamma_conv or self.gamma)


@dataclass(frozen=True)
class Generator:
    """Evaluatable driver with declared structural flags and its profile."""

    fn: Callable
    profile: CoefficientProfile
    flags: frozenset = frozenset()
    name: str = "generator"

    def __call__(self, t, b, y, z) -> np.ndarray:
        """g at time(s) t for per-path Brownian values b (n,d), y (n,), z (n,d)."""
        return np.asarray(self.fn(t, b, y, z), dtype=float)

    def with_flags(self, *extra: str) -> "Generator":
        return replace(self, flags=self.flags | frozenset(extra))


@dataclass(frozen=True)
class TerminalData:
    """Terminal value as a deterministic function of the terminal path state."""

    fn: Callable
    description: str = "terminal"

    def __call__(self, b_terminal: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(b_terminal)), dtype=float)


@dataclass(frozen=True)
class TruncationIndex:
    n: int
    q: int

    def __post_init__(self):
        if self.n < 1 or self.q < 1:
            raise ValueError("truncation indices must be positive integers")

    @property
    def cap(self) -> int:
        return max(self.n, self.q)


# ---------------------------------------------------------------------------
# builtin examples
# ---------------------------------------------------------------------------

def example1_q(x) -> np.ndarray:
    """Piecewise-linear kink function used by the first builtin example.

    -x below -2, -(3/2)x - 1 in between, -2x above 2; continuous at the knots.
    """
    x = np.asarray(x, dtype=float)
    return np.where(x <= -2.0, -x, np.where(x >= 2.0, -2.0 * x, -1.5 * x - 1.0))


def _znorm(z: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(z, dtype=float) ** 2, axis=-1))


def _bnorm(b: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(b, dtype=float) ** 2, axis=-1))


def _sup_on_grid(fn: TimeFn, horizon: float) -> float:
    ts = np.linspace(0.0, horizon, 513)
    return float(np.max([float(fn(t)) for t in ts]))


def builtin_example_1(alpha: float, beta=0.5, gamma=0.25, d: int = 1,
                      horizon: float = 1.0) -> Generator:
    """Driver |B_t| + beta(t) h(y) + gamma(t) sum_i q(z_i) + gamma(t)|z|^alpha.

    h(y) is the signed-root branch cbrt(|y|) on y <= 0 (nonincreasing there,
    with unbounded slope at 0-) and sin(y) on y > 0; q is the piecewise-linear
    kink above.  Neither branch is locally Lipschitz in y at 0.
    """
    br, gr = _as_time_fn(beta), _as_time_fn(gamma)

    def h(y):
        y = np.asarray(y, dtype=float)
        return np.where(y <= 0.0, np.cbrt(np.abs(y)), np.sin(y))

    def fn(t, b, y, z):
        z = np.atleast_2d(z)
        zn = _znorm(z)
        qsum = example1_q(z).sum(axis=-1)
        return _bnorm(b) + br(t) * h(y) + gr(t) * (qsum + zn ** alpha)

    # Base tier certifies the one-sided growth: sgn(y) h(y) <= |y|, the kink
    # sum obeys sum|q(z_i)| <= d + 2 sqrt(d) |z|, and |z| <= 1 + |z|^alpha.
    # The theta-difference tier is larger: the y-piece needs the gated
    # monotone/Lipschitz bound (f += beta, beta doubled), each q coordinate
    # goes through the tent construction with a=2, k0=2, envelope 1+2|x|
    # (169 + 6|dz| per coordinate), and the |z|^alpha piece is convex.
    rootd = math.sqrt(d)
    dsum = 6.0 * d ** (1.0 - alpha / 2.0)

    def f(t, b):
        return _bnorm(b) + br(t) + (d + 2.0 * rootd) * gr(t)

    def f_conv(t, b):
        return _bnorm(b) + br(t) + 169.0 * d * gr(t)

    gr_sup = _sup_on_grid(gr, horizon)
    profile = CoefficientProfile(
        alpha=alpha,
        beta=br,
        gamma=lambda t: (1.0 + 2.0 * rootd) * gr(t),
        f=f,
        psi_growth=lambda u: np.cbrt(np.asarray(u, dtype=float)) + np.asarray(u, dtype=float),
        c_quad=(rootd + 1.0) * gr_sup,
        u=br,
        v=lambda t: (1.0 + 2.0 * rootd) * gr(t),
        k1=_const(0.0),
        k2=br,
        c1=lambda t: (1.5 + alpha * 2.0 ** (alpha - 1.0)) * gr(t),
        c2=lambda t: 2.0 * gr(t),
        c3=_const(0.0),
        a=2.0,
        f_conv=f_conv,
        beta_conv=lambda t: 2.0 * br(t),
        gamma_conv=lambda t: (1.0 + dsum) * gr(t),
    )
    return Generator(fn=fn, profile=profile, name="example1",
                     flags=frozenset({"satisfies-EX1", "satisfies-EX2",
                                      "satisfies-UNprime-i", "satisfies-UN-i"}))


def _log_power_lipschitz(alpha_star: float) -> float:
    # sup of d/dx [ln(e+x)]^(alpha*/2) over x >= 0; exact via the stationary point.
    m = alpha_star / 2.0 - 1.0
    return (alpha_star / 2.0) * max(1.0 / math.e, (m / math.e) ** m)


def _log_power_alpha_ratio(alpha: float, alpha_star: float) -> float:
    # sup over x >= 1 of [ln(e+x)]^(alpha*/2) / x^alpha (unimodal; dense log grid).
    x = np.exp(np.linspace(0.0, 60.0, 20001))
    ratio = np.log(math.e + x) ** (alpha_star / 2.0) / x ** alpha
    return float(ratio.max()) * 1.01


def builtin_example_2(alpha: float, beta=0.5, gamma=0.25, d: int = 1,
                      horizon: float = 1.0) -> Generator:
    """Driver |B_t| + beta(t) sqrt(|y|) 1_{y<=0} + gamma(t) sum_i [ln(e+|z_i|)]^{a*/2} + 2 gamma(t)|z|^alpha.

    The logarithmic z-part forces the weaker extended-convexity variant whose
    right side carries the [ln(e+|z_2|)]^{a*/2} allowance.
    """
    br, gr = _as_time_fn(beta), _as_time_fn(gamma)
    astar = conjugate_exponent(alpha)
    half = astar / 2.0

    ts = np.linspace(0.0, horizon, 257)
    if not 0.0 < trapezoid([float(gr(t)) for t in ts], ts) < math.inf:
        raise InvalidCoefficientError("example2 requires gamma with a positive finite integral")

    def lterm(x):
        return np.log(math.e + np.abs(np.asarray(x, dtype=float))) ** half

    def fn(t, b, y, z):
        z = np.atleast_2d(z)
        y = np.asarray(y, dtype=float)
        zn = _znorm(z)
        ysqrt = np.where(y <= 0.0, np.sqrt(np.abs(y)), 0.0)
        return _bnorm(b) + br(t) * ysqrt + gr(t) * (lterm(z).sum(axis=-1) + 2.0 * zn ** alpha)

    L = _log_power_lipschitz(astar)        # global Lipschitz slope of the log power
    s1 = _log_power_alpha_ratio(alpha, astar)
    l1 = math.log(math.e + 1.0) ** half
    # Base tier uses the growth split lterm(x) <= lterm(1) + s1 x^alpha.  The
    # theta-difference tier runs each log coordinate through the monotone band
    # construction (4L|dz| + 11 + lterm(|z2|)) and the convex route for the
    # 2|z|^alpha piece.
    rootd = math.sqrt(d)

    def f(t, b):
        return _bnorm(b) + br(t) + d * l1 * gr(t)

    def f_conv(t, b):
        return _bnorm(b) + br(t) + (11.0 * d + 4.0 * L * rootd + d * l1) * gr(t)

    gr_sup = _sup_on_grid(gr, horizon)
    profile = CoefficientProfile(
        alpha=alpha,
        beta=br,
        gamma=lambda t: (d * s1 + 2.0) * gr(t),
        f=f,
        psi_growth=lambda u: np.sqrt(np.asarray(u, dtype=float)),
        c_quad=(d * s1 + 2.0) * gr_sup,
        u=br,
        v=lambda t: (d * s1 + 2.0) * gr(t),
        k1=_const(0.0),
        k2=_const(0.0),
        a=0.0,
        f_conv=f_conv,
        beta_conv=br,
        gamma_conv=lambda t: (d + 4.0 * L * rootd + 2.0) * gr(t),
    )
    return Generator(fn=fn, profile=profile, name="example2",
                     flags=frozenset({"satisfies-EX1", "satisfies-EX2", "satisfies-UN-i"}))


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def truncate_terminal(xi: TerminalData, idx: TruncationIndex) -> TerminalData:
    """Clamp the positive part at n and the negative part at q."""

    def fn(b_terminal):
        raw = xi(b_terminal)
        return np.minimum(np.maximum(raw, 0.0), idx.n) - np.minimum(np.maximum(-raw, 0.0), idx.q)

    return TerminalData(fn=fn, description=f"{xi.description}^({idx.n},{idx.q})")


def truncate_generator(g: Generator, idx: TruncationIndex) -> Generator:
    """Clamp g+ at n e^{-t} and g- at q e^{-t}; result is dominated by cap * e^{-t}."""

    def fn(t, b, y, z):
        raw = g(t, b, y, z)
        decay = np.exp(-np.asarray(t, dtype=float))
        return (np.minimum(np.maximum(raw, 0.0), idx.n * decay)
                - np.minimum(np.maximum(-raw, 0.0), idx.q * decay))

    prof = g.profile
    old_f = prof.f

    def f(t, b):
        return np.minimum(old_f(t, b), idx.cap * np.exp(-np.asarray(t, dtype=float)))

    return Generator(fn=fn, profile=replace(prof, f=f),
                     flags=g.flags | {"truncated"},
                     name=f"{g.name}^({idx.n},{idx.q})")


def reflect_generator(g: Generator) -> Generator:
    """g_hat(t, y, z) = -g(t, -y, -z); swaps the one-sided condition flags."""

    def fn(t, b, y, z):
        return -g(t, b, -np.asarray(y, dtype=float), -np.atleast_2d(z))

    swaps = {"satisfies-UN-i": "satisfies-UN-ii", "satisfies-UN-ii": "satisfies-UN-i",
             "satisfies-UNprime-i": "satisfies-UNprime-ii",
             "satisfies-UNprime-ii": "satisfies-UNprime-i"}
    flags = frozenset(swaps.get(fl, fl) for fl in g.flags)
    return Generator(fn=fn, profile=g.profile, flags=flags, name=f"reflect({g.name})")


def theta_difference_generator(g: Generator, g_prime: Generator, theta: float,
                               grid, Yp: np.ndarray, Zp: np.ndarray,
                               variant: str = "primary") -> Generator:
    """Driver of the theta-residual pair, anchored to a reference solution field.

    ``primary`` perturbs g around the reference (Y', Z'); ``resp`` is the
    mirrored form that freezes the (Y, Z) arguments of the generator gap
    instead, used when the inequality hypothesis is asserted along the other
    solution.  The result can only be evaluated at grid nodes with rows
    aligned to the bundle that produced Yp/Zp.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if variant not in ("primary", "resp"):
        raise ValueError(f"unknown variant {variant!r}")
    nodes = np.asarray(grid.nodes)
    Yp = np.asarray(Yp, dtype=float)
    Zp = np.asarray(Zp, dtype=float)

    def node_index(t: float) -> int:
        j = int(np.argmin(np.abs(nodes - t)))
        if abs(nodes[j] - t) > 1e-12 * max(1.0, grid.horizon):
            raise ValueError(f"theta-difference generator only evaluates at grid nodes, got t={t}")
        return j

    def fn(t, b, y, z):
        j = node_index(float(np.asarray(t).reshape(-1)[0]))
        yp = Yp[:, j]
        zp = Zp[:, min(j, Zp.shape[1] - 1), :]
        y = np.asarray(y, dtype=float)
        z = np.atleast_2d(z)
        ymix = (1.0 - theta) * y + theta * yp
        zmix = (1.0 - theta) * z + theta * zp
        gp_ref = g_prime(t, b, yp, zp)
        if variant == "primary":
            g_ref = g(t, b, yp, zp)
            return ((g(t, b, ymix, zmix) - theta * g_ref) / (1.0 - theta)
                    + theta * (g_ref - gp_ref) / (1.0 - theta))
        g_here = g(t, b, y, z)
        gp_here = g_prime(t, b, y, z)
        return ((g_here - gp_here) / (1.0 - theta)
                + (g_prime(t, b, ymix, zmix) - theta * gp_ref) / (1.0 - theta))

    return Generator(fn=fn, profile=g.profile, flags=frozenset({"theta-difference"}),
                     name=f"delta_theta({g.name},{g_prime.name};{theta})")


# ---------------------------------------------------------------------------
# catalogs
# ---------------------------------------------------------------------------

def zero_generator(alpha: float = 1.5) -> Generator:
    profile = CoefficientProfile(alpha=alpha, beta=_const(0.0), gamma=_const(0.0),
                                 f=lambda t, b: np.zeros(np.atleast_2d(b).shape[0]),
                                 psi_growth=lambda u: np.asarray(u, dtype=float), c_quad=1.0,
                                 u=_const(0.0), v=_const(0.0), k1=_const(0.0), k2=_const(0.0))
    return Generator(fn=lambda t, b, y, z: np.zeros(np.atleast_2d(z).shape[0]),
                     profile=profile, name="zero",
                     flags=frozenset({"satisfies-EX1", "satisfies-EX2",
                                      "satisfies-UNprime-i", "satisfies-UN-i"}))


def linear_generator(alpha: float = 1.5, b_y: float = -1.0, b_z: float = 0.0) -> Generator:
    """g = b_y * y + b_z * z_1; convex, Lipschitz, satisfies every declared condition."""

    def fn(t, b, y, z):
        z = np.atleast_2d(z)
        return b_y * np.asarray(y, dtype=float) + b_z * z[:, 0]

    cy, cz = abs(b_y), abs(b_z)
    profile = CoefficientProfile(
        alpha=alpha, beta=_const(cy), gamma=_const(cz + 1e-12),
        f=lambda t, b: np.full(np.atleast_2d(b).shape[0], cz),
        psi_growth=lambda u: np.asarray(u, dtype=float), c_quad=max(cz, 1e-9),
        u=_const(cy), v=_const(cz), k1=_const(cy), k2=_const(cy),
        c1=_const(cz), c2=_const(cz), c3=_const(cz), a=0.0)
    return Generator(fn=fn, profile=profile, name=f"linear({b_y},{b_z})",
                     flags=frozenset({"satisfies-EX1", "satisfies-EX2", "convex",
                                      "satisfies-UNprime-i", "satisfies-UN-i"}))


def convex_power_generator(alpha: float = 1.5, scale=1.0) -> Generator:
    """g = gamma(t) |z|^alpha; the canonical convex sub-quadratic driver."""
    gr = _as_time_fn(scale)

    def fn(t, b, y, z):
        return gr(t) * _znorm(np.atleast_2d(z)) ** alpha

    profile = CoefficientProfile(
        alpha=alpha, beta=_const(0.0), gamma=gr,
        f=lambda t, b: np.zeros(np.atleast_2d(b).shape[0]),
        psi_growth=lambda u: np.asarray(u, dtype=float),
        c_quad=_sup_on_grid(gr, 50.0) + 1.0,
        u=_const(0.0), v=gr, k1=_const(0.0), k2=_const(0.0), a=0.0)
    return Generator(fn=fn, profile=profile, name="convex-power",
                     flags=frozenset({"satisfies-EX1", "satisfies-EX2", "convex",
                                      "satisfies-UNprime-i", "satisfies-UN-i"}))


def expression_generator(text: str, alpha: float, beta=0.0, gamma=0.0,
                         f_const: float = 0.0, d: int = 1) -> Generator:
    """Generator from a custom expression over t, y, z (|z|), z1..z9, babs (|B_t|)."""
    names = {"t", "y", "z", "babs"} | {f"z{i}" for i in range(1, 10)}
    compiled = compile_expression(text, names)

    def fn(t, b, y, z):
        z = np.atleast_2d(z)
        env = {"t": np.asarray(t, dtype=float), "y": np.asarray(y, dtype=float),
               "z": _znorm(z), "babs": _bnorm(b)}
        for i in range(1, 10):
            env[f"z{i}"] = z[:, i - 1] if i <= z.shape[1] else np.zeros(z.shape[0])
        return np.broadcast_to(np.asarray(compiled(env), dtype=float), env["y"].shape).copy()

    profile = CoefficientProfile(alpha=alpha, beta=_as_time_fn(beta), gamma=_as_time_fn(gamma),
                                 f=lambda t, b: np.full(np.atleast_2d(b).shape[0], f_const),
                                 psi_growth=lambda u: np.asarray(u, dtype=float), c_quad=1.0)
    return Generator(fn=fn, profile=profile, name=f"expr({text})", flags=frozenset())


GENERATOR_IDS = ("example1", "example2", "linear", "convex-power", "zero", "custom-expression")


def make_generator(gen_id: str, alpha: float, beta=0.5, gamma=0.25, d: int = 1,
                   horizon: float = 1.0, expression: str | None = None,
                   b_y: float = -1.0, b_z: float = 0.0, f_const: float = 0.0) -> Generator:
    if gen_id == "example1":
        return builtin_example_1(alpha, beta, gamma, d, horizon)
    if gen_id == "example2":
        return builtin_example_2(alpha, beta, gamma, d, horizon)
    if gen_id == "linear":
        return linear_generator(alpha, b_y=b_y, b_z=b_z)
    if gen_id == "convex-power":
        return convex_power_generator(alpha, scale=gamma)
    if gen_id == "zero":
        return zero_generator(alpha)
    if gen_id == "custom-expression":
        if not expression:
            raise ValueError("custom-expression requires an expression string")
        return expression_generator(expression, alpha, beta=beta, gamma=gamma, d=d,
                                    f_const=f_const)
    raise KeyError(f"unknown generator id {gen_id!r}; catalog: {', '.join(GENERATOR_IDS)}")


TERMINAL_IDS = ("zero", "constant", "bt", "clamp-bt")


def make_terminal(term_id: str, value: float = 0.0, bound: float = 3.0,
                  shift: float = 0.0) -> TerminalData:
    if term_id == "zero":
        return TerminalData(lambda b: np.zeros(np.atleast_2d(b).shape[0]), "zero")
    if term_id == "constant":
        return TerminalData(lambda b: np.full(np.atleast_2d(b).shape[0], float(value)),
                            f"constant({value})")
    if term_id == "bt":
        return TerminalData(lambda b: np.atleast_2d(b)[:, 0] + shift, f"bt+{shift}")
    if term_id == "clamp-bt":
        return TerminalData(lambda b: np.clip(np.atleast_2d(b)[:, 0], -bound, bound) + shift,
                            f"clamp(bt,+-{bound})+{shift}")
    raise KeyError(f"unknown terminal id {term_id!r}; catalog: {', '.join(TERMINAL_IDS)}")
