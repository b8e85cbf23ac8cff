"""Time grids, Brownian path bundles, and least-squares conditional expectations.

Everything here is deterministic given its arguments: path generation is keyed
by (seed, path index) through a counter-based bit generator, so any subset of
paths can be regenerated bit-exactly without producing the rest of the bundle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing partition 0 = t_0 < t_1 < ... < t_N = horizon.

    ``truncated_from_infinite`` records that a nominally infinite horizon was
    cut to a finite one; the grid itself is always finite.
    """

    horizon: float
    nodes: np.ndarray
    truncated_from_infinite: bool = False

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if nodes[0] != 0.0 or nodes[-1] != self.horizon:
            raise ValueError("nodes must start at 0 and end at the horizon")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must be strictly increasing")

    @property
    def steps(self) -> int:
        return len(self.nodes) - 1

    @property
    def dt(self) -> np.ndarray:
        """Step sizes, length ``steps``."""
        return np.diff(self.nodes)


def build_grid(horizon: float, steps: int, scheme: str = "uniform",
               ratio: float = 0.5, truncated_from_infinite: bool = False) -> TimeGrid:
    """Build a time grid with ``steps`` intervals over [0, horizon].

    ``uniform`` gives equal steps.  ``geometric`` shrinks the steps by
    ``ratio`` toward the horizon so nodes cluster near the terminal time.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if scheme == "uniform":
        nodes = np.linspace(0.0, horizon, steps + 1)
    elif scheme == "geometric":
        if not 0.0 < ratio < 1.0:
            raise ValueError("geometric ratio must lie in (0, 1)")
        widths = ratio ** np.arange(steps)
        nodes = np.concatenate([[0.0], np.cumsum(widths)])
        nodes *= horizon / nodes[-1]
    else:
        raise ValueError(f"unknown grid scheme {scheme!r}")
    nodes[-1] = horizon
    return TimeGrid(horizon=horizon, nodes=nodes, truncated_from_infinite=truncated_from_infinite)


@dataclass(frozen=True)
class PathBundle:
    """Brownian increments for ``count`` paths on a shared grid.

    ``increments`` has shape (count, steps, dims) with per-step variance dt_j.
    """

    grid: TimeGrid
    dims: int
    count: int
    increments: np.ndarray
    seed: int
    _levels: dict = field(default_factory=dict, repr=False, compare=False)

    def levels(self) -> np.ndarray:
        """Brownian values at the grid nodes, shape (count, steps + 1, dims)."""
        if "levels" not in self._levels:
            lv = np.zeros((self.count, self.grid.steps + 1, self.dims))
            np.cumsum(self.increments, axis=1, out=lv[:, 1:, :])
            self._levels["levels"] = lv
        return self._levels["levels"]

    def terminal(self) -> np.ndarray:
        """Brownian values at the horizon, shape (count, dims)."""
        return self.levels()[:, -1, :]


def _path_stream(seed: int, index: int) -> np.random.Generator:
    # Counter-based keying: the stream is a pure function of (seed, index),
    # independent of how many other paths exist or the order they are drawn.
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_paths(grid: TimeGrid, dims: int, count: int, seed: int) -> PathBundle:
    """Draw ``count`` independent d-dimensional Brownian paths on ``grid``."""
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    sqrt_dt = np.sqrt(grid.dt)[None, :, None]
    increments = np.empty((count, grid.steps, dims))
    for i in range(count):
        increments[i] = _path_stream(seed, i).standard_normal((grid.steps, dims))
    increments *= sqrt_dt
    return PathBundle(grid=grid, dims=dims, count=count, increments=increments, seed=seed)


@dataclass(frozen=True)
class RegressionBasis:
    """Feature map used to project path data onto a conditional-expectation proxy.

    kind ``polynomial``: per-coordinate monomials 1, x_c, ..., x_c^degree.
    kind ``piecewise-constant-bins``: one-hot bin indicators over [lo, hi]
    (scalar state only); values outside the range fall into the edge bins.
    """

    kind: str = "polynomial"
    size: int = 3
    lo: float = -5.0
    hi: float = 5.0

    def __post_init__(self):
        if self.kind not in ("polynomial", "piecewise-constant-bins"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("basis size must be >= 1")
        if self.kind == "piecewise-constant-bins" and not self.hi > self.lo:
            raise ValueError("bin range must satisfy hi > lo")

    def features(self, t: float, state: np.ndarray) -> np.ndarray:
        """Feature matrix for per-path states, shape (n_paths, n_features)."""
        state = np.atleast_2d(np.asarray(state, dtype=float))
        n, d = state.shape
        if self.kind == "polynomial":
            cols = [np.ones(n)]
            for c in range(d):
                xc = state[:, c]
                for p in range(1, self.size + 1):
                    cols.append(xc ** p)
            return np.stack(cols, axis=1)
        idx = self.bin_indices(state)
        out = np.zeros((n, self.size))
        out[np.arange(n), idx] = 1.0
        return out

    def bin_indices(self, state: np.ndarray) -> np.ndarray:
        """Bin assignment per path (partition basis only); edges clip outliers."""
        if self.kind != "piecewise-constant-bins":
            raise ValueError("bin indices only exist for the partition basis")
        state = np.atleast_2d(np.asarray(state, dtype=float))
        if state.shape[1] != 1:
            raise ValueError("piecewise-constant bins require a scalar state")
        edges = np.linspace(self.lo, self.hi, self.size + 1)
        return np.clip(np.searchsorted(edges, state[:, 0], side="right") - 1, 0, self.size - 1)


def regress_conditional(targets: np.ndarray, features: np.ndarray):
    """Least-squares projection of targets onto the feature columns.

    Rank-deficient systems (e.g. empty bins) are solved in the minimum-norm
    sense rather than rejected.  Returns (coefficients, fitted values).
    """
    targets = np.asarray(targets, dtype=float)
    features = np.asarray(features, dtype=float)
    if targets.size == 0 or features.size == 0:
        raise ValueError("regression needs at least one sample")
    if features.ndim != 2 or targets.shape[0] != features.shape[0]:
        raise ValueError("one feature row is required per target")
    coef, _, _, _ = np.linalg.lstsq(features, targets, rcond=None)
    return coef, features @ coef
