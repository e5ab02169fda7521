"""Initial-value integration of -y'' + q(x) y = lambda y on [0, T].

The equation is integrated as a first-order system with classical fixed-step
RK4.  The step law resolves the oscillation/growth scale rho = sqrt(lambda):

    h = min(h_max, theta / max(1, |rho|)),
    theta = min(theta_cap, 0.5, (120 tol / (|rho| T))^(1/4)),

where the quartic root comes from the RK4 phase-error model
N * (|rho| h)^5 / 120 ~ tol for N = T/h steps.  Solutions that grow like
exp(|Im rho| x) are kept representable by a running log-scale: stored values
are the true solution times exp(-s).  A single sweep integrates a whole
family of spectral points (and both fundamental columns) at once; all public
entry points are thin wrappers over that core.

Branch convention: rho = sqrt(lambda) with Im rho >= 0, and rho >= 0 when
lambda is real non-negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log, pi

import numpy as np

from .errors import InputError, RangeError
from .potential import Potential

_EDGE_TOL = 1e-12
_MAX_NODES = 2_000_000  # grid cap; |rho| beyond this cannot be integrated stepwise


def principal_rho(lam) -> np.ndarray:
    """sqrt(lambda) on the branch with Im rho >= 0 (rho > 0 for positive real lambda)."""
    lam = np.asarray(lam, dtype=complex)
    rho = np.sqrt(lam)
    flip = (rho.imag < 0) | ((rho.imag == 0) & (rho.real < 0))
    return np.where(flip, -rho, rho)


@dataclass(frozen=True)
class SpectralPoint:
    """A spectral parameter lambda = rho^2 with the branch Im rho >= 0."""

    lam: complex
    rho: complex

    @classmethod
    def from_lambda(cls, lam: complex) -> "SpectralPoint":
        lam = complex(lam)
        if not (np.isfinite(lam.real) and np.isfinite(lam.imag)):
            raise InputError(f"lambda must be finite, got {lam}")
        return cls(lam=lam, rho=complex(principal_rho(lam)))

    @property
    def tau(self) -> float:
        """Im rho, the exponential growth rate of solutions."""
        return self.rho.imag


@dataclass(frozen=True)
class GridSpec:
    """Accuracy and safety knobs for the fixed-step integrator."""

    tol: float = 1e-10  # target relative phase accuracy over the sweep
    h_max: float | None = None  # absolute cap on the step (default T / n_min)
    n_min: int = 64
    theta_cap: float = 0.35  # cap on |rho| * h per step
    scale_threshold: float = 1e8  # rescale when solution magnitudes exceed this
    check_every: int = 16  # steps between rescale checks
    tau_T_budget: float = 600.0  # |Im rho| * T beyond this -> range error

    def coarsened(self, tol: float) -> "GridSpec":
        """Same spec with a looser tolerance (never tighter)."""
        return GridSpec(
            tol=max(self.tol, tol),
            h_max=self.h_max,
            n_min=self.n_min,
            theta_cap=self.theta_cap,
            scale_threshold=self.scale_threshold,
            check_every=self.check_every,
            tau_T_budget=self.tau_T_budget,
        )


def solver_grid(
    q: Potential,
    rho_abs_max: float,
    spec: GridSpec | None = None,
    extra_required=(),
) -> np.ndarray:
    """Node grid on [0, T] resolving the oscillation scale and all marked points."""
    spec = spec or GridSpec()
    T = q.T
    r = max(1.0, float(rho_abs_max))
    theta = min(spec.theta_cap, 0.5, (120.0 * spec.tol / (r * T)) ** 0.25)
    h = theta / r
    h_max = spec.h_max if spec.h_max is not None else T / spec.n_min
    q_hmax = q.suggested_hmax()
    if q_hmax is not None:
        h_max = min(h_max, q_hmax)
    h = min(h, h_max)
    n = max(spec.n_min, ceil(T / h))
    if n > _MAX_NODES:
        raise RangeError(
            f"|rho| = {r:.3g} needs {n} grid nodes to resolve the oscillation, "
            f"beyond the {_MAX_NODES} node cap"
        )
    base = np.linspace(0.0, T, n + 1)
    parts = [np.asarray(q.required_points(), dtype=float)]
    for r_ in extra_required:
        parts.append(np.atleast_1d(np.asarray(r_, dtype=float)))
    req = np.concatenate(parts)
    req = req[(req >= 0.0) & (req <= T + _EDGE_TOL * max(1.0, T))]
    if len(req) == 0:
        return base
    grid = np.union1d(base, req)
    # drop base nodes that nearly coincide with a required point, keeping the exact value
    tiny = _EDGE_TOL * max(1.0, T)
    keep = np.ones(len(grid), dtype=bool)
    close_next = np.diff(grid) < tiny
    req_set = set(np.round(req / tiny).astype(np.int64).tolist())
    for i in np.nonzero(close_next)[0]:
        drop = i if int(round(grid[i] / tiny)) not in req_set else i + 1
        keep[drop] = False
    return grid[keep]


@dataclass(frozen=True, eq=False)
class SolutionTrace:
    """Solution samples on a grid; true values are exp(log_scale) * stored values."""

    grid: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    log_scale: float = 0.0

    def value_at(self, x: float):
        """(y, dy, interpolated) at x; cubic Hermite between nodes, flagged."""
        g = self.grid
        i = int(np.searchsorted(g, x - _EDGE_TOL * max(1.0, g[-1])))
        if i < len(g) and abs(g[i] - x) <= _EDGE_TOL * max(1.0, g[-1]):
            return complex(self.y[i]), complex(self.dy[i]), False
        if x < g[0] or x > g[-1]:
            raise InputError(f"x={x} outside the trace domain [{g[0]}, {g[-1]}]")
        i = min(max(i - 1, 0), len(g) - 2)
        h = g[i + 1] - g[i]
        t = (x - g[i]) / h
        y0, y1 = self.y[i], self.y[i + 1]
        d0, d1 = self.dy[i] * h, self.dy[i + 1] * h
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t * t * (3 - 2 * t)
        h11 = t * t * (t - 1)
        yv = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
        dv = (
            6 * t * (t - 1) * (y0 - y1) + (3 * t * t - 4 * t + 1) * d0 + t * (3 * t - 2) * d1
        ) / h
        return complex(yv), complex(dv), True

    @property
    def endpoint_values(self):
        return (complex(self.y[0]), complex(self.dy[0]), complex(self.y[-1]), complex(self.dy[-1]))


class WronskianValue(complex):
    """Complex value carrying an `interpolated` flag."""

    def __new__(cls, value: complex, interpolated: bool = False):
        obj = super().__new__(cls, value)
        obj.interpolated = interpolated
        return obj


def wronskian(u: SolutionTrace, v: SolutionTrace, x: float) -> WronskianValue:
    """u(x) v'(x) - u'(x) v(x), true scale (may raise if the scales overflow)."""
    if len(u.grid) != len(v.grid) or not np.allclose(u.grid, v.grid, rtol=0, atol=1e-12):
        raise InputError("Wronskian requires traces on a shared grid")
    uy, udy, fu = u.value_at(x)
    vy, vdy, fv = v.value_at(x)
    s = u.log_scale + v.log_scale
    if abs(s) > 700.0:
        raise RangeError(f"Wronskian scale exp({s:.1f}) is not representable")
    return WronskianValue((uy * vdy - udy * vy) * np.exp(s), fu or fv)


def combine_traces(traces, coeffs) -> SolutionTrace:
    """Linear combination of traces on a shared grid, scale-aware."""
    traces = list(traces)
    coeffs = [complex(c) for c in coeffs]
    g = traces[0].grid
    S = max(t.log_scale for t in traces)
    y = np.zeros(len(g), dtype=complex)
    dy = np.zeros(len(g), dtype=complex)
    for t, c in zip(traces, coeffs):
        f = c * np.exp(t.log_scale - S)
        y += f * t.y
        dy += f * t.dy
    return SolutionTrace(grid=g, y=y, dy=dy, log_scale=S)


# ---------------------------------------------------------------------------
# Batched sweep core


@dataclass(eq=False)
class FamilyStore:
    """Result of one batched sweep: a family of solutions over shared nodes.

    `y`/`dy` have shape (p, m, k): p stored nodes, m spectral points, k columns.
    `s` is the per-node log-scale, shape (p, m).  In "points" mode only the
    nodes listed in `point_idx` are stored; endpoint states are always kept.
    """

    grid: np.ndarray
    lam: np.ndarray
    rho: np.ndarray
    side: str  # "X": initial data at 0; "Z": initial data at T
    y: np.ndarray | None
    dy: np.ndarray | None
    s: np.ndarray | None
    point_idx: np.ndarray | None
    state0: tuple  # (y, dy, s) at grid[0]
    stateT: tuple  # (y, dy, s) at grid[-1]

    def scale_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """(exp(s - S), S) aligning stored nodes to a common per-lambda scale."""
        S = self.s.max(axis=0)
        return np.exp(self.s - S[None, :]), S


def _check_budget(rho: np.ndarray, T: float, spec: GridSpec):
    tau_max = float(np.max(np.abs(rho.imag))) if rho.size else 0.0
    if tau_max * T > spec.tau_T_budget:
        raise RangeError(
            f"|Im rho| * T = {tau_max * T:.1f} exceeds the overflow budget {spec.tau_T_budget}"
        )


def integrate_family(
    q: Potential,
    lam,
    side: str,
    grid: np.ndarray,
    spec: GridSpec | None = None,
    *,
    store: str = "none",
    store_points=None,
    init: tuple | None = None,
    q_steps: tuple | None = None,
) -> FamilyStore:
    """Integrate the fundamental family (or custom initial data) over `grid`.

    side "X" starts at x=0, side "Z" at x=T, both with the identity initial
    state [[1, 0], [0, 1]] for (y, y') unless `init` gives (y0, dy0) arrays of
    shape (m, k).  `q_steps` may supply precomputed (q_left, q_mid, q_right)
    per step, each of shape (n-1,) or (n-1, m), to batch over potentials.
    """
    spec = spec or GridSpec()
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    rho = principal_rho(lam)
    _check_budget(rho, float(grid[-1]), spec)
    if side not in ("X", "Z"):
        raise InputError("side must be 'X' or 'Z'")
    m = len(lam)
    n = len(grid)
    if q_steps is None:
        qa, qm, qb = q.step_samples(grid)
    else:
        qa, qm, qb = q_steps

    if init is None:
        y = np.tile(np.asarray([[1.0 + 0j, 0.0 + 0j]]), (m, 1))
        d = np.tile(np.asarray([[0.0 + 0j, 1.0 + 0j]]), (m, 1))
    else:
        y = np.array(init[0], dtype=complex, copy=True)
        d = np.array(init[1], dtype=complex, copy=True)
        if y.ndim == 1:
            y = y[:, None]
            d = d[:, None]
    k = y.shape[1]
    lam_col = lam[:, None]
    rho_div = np.maximum(1.0, np.abs(rho))[:, None]
    s = np.zeros(m)

    reverse = side == "Z"
    step_order = range(n - 2, -1, -1) if reverse else range(n - 1)
    node_order = list(range(n - 1, -1, -1)) if reverse else list(range(n))

    # storage layout follows ascending node order regardless of sweep direction
    if store == "points":
        pts = np.asarray(sorted(store_points), dtype=int)
        slot_of = {int(i): j for j, i in enumerate(pts)}
        y_st = np.empty((len(pts), m, k), dtype=complex)
        dy_st = np.empty((len(pts), m, k), dtype=complex)
        s_st = np.empty((len(pts), m))
    elif store in ("y", "yd"):
        pts = None
        y_st = np.empty((n, m, k), dtype=complex)
        dy_st = np.empty((n, m, k), dtype=complex) if store == "yd" else None
        s_st = np.empty((n, m))
    elif store == "none":
        pts = None
        y_st = dy_st = s_st = None
    else:
        raise InputError(f"unknown store mode {store!r}")

    def record(node: int):
        if store == "none":
            return
        if store == "points":
            j = slot_of.get(node)
            if j is None:
                return
            y_st[j] = y
            dy_st[j] = d
            s_st[j] = s
        else:
            y_st[node] = y
            s_st[node] = s
            if dy_st is not None:
                dy_st[node] = d

    start_node = node_order[0]
    state_start = (y.copy(), d.copy(), s.copy())
    record(start_node)

    threshold = spec.scale_threshold
    check_every = max(1, spec.check_every)
    per_elem = qa.ndim == 2 if hasattr(qa, "ndim") else False

    for count, i in enumerate(step_order):
        x_lo, x_hi = grid[i], grid[i + 1]
        if reverse:
            h = x_lo - x_hi
            c_start, c_end = qb, qa
        else:
            h = x_hi - x_lo
            c_start, c_end = qa, qb
        if per_elem:
            ca = c_start[i][:, None] - lam_col
            cm = qm[i][:, None] - lam_col
            cb = c_end[i][:, None] - lam_col
        else:
            ca = c_start[i] - lam_col
            cm = qm[i] - lam_col
            cb = c_end[i] - lam_col
        h2 = 0.5 * h
        h6 = h / 6.0

        k1d = ca * y
        y2 = y + h2 * d
        d2 = d + h2 * k1d
        k2d = cm * y2
        y3 = y + h2 * d2
        d3 = d + h2 * k2d
        k3d = cm * y3
        y4 = y + h * d3
        d4 = d + h * k3d
        k4d = cb * y4
        y = y + h6 * (d + 2.0 * (d2 + d3) + d4)
        d = d + h6 * (k1d + 2.0 * (k2d + k3d) + k4d)

        if (count + 1) % check_every == 0 or count == len(step_order) - 1:
            mag = np.maximum(
                np.abs(y).max(axis=1), np.abs(d).max(axis=1) / rho_div[:, 0]
            )
            if not np.all(np.isfinite(mag)):
                raise RangeError("solution overflow: rescaling interval too coarse")
            big = mag > threshold
            if np.any(big):
                fac = mag[big]
                y[big] /= fac[:, None]
                d[big] /= fac[:, None]
                s = s.copy()
                s[big] += np.log(fac)

        record(node_order[count + 1])

    state_end = (y.copy(), d.copy(), s.copy())
    if reverse:
        state0, stateT = state_end, state_start
    else:
        state0, stateT = state_start, state_end
    return FamilyStore(
        grid=grid,
        lam=lam,
        rho=rho,
        side=side,
        y=y_st,
        dy=dy_st,
        s=s_st,
        point_idx=pts,
        state0=state0,
        stateT=stateT,
    )


def _traces_from_store(fam: FamilyStore) -> list[SolutionTrace]:
    """Per-column SolutionTraces (single-lambda, 'yd' mode stores only)."""
    if fam.y is None or fam.dy is None or fam.y.shape[1] != 1:
        raise InputError("traces need a single-lambda sweep stored in 'yd' mode")
    E, S = fam.scale_weights()
    out = []
    for col in range(fam.y.shape[2]):
        out.append(
            SolutionTrace(
                grid=fam.grid,
                y=fam.y[:, 0, col] * E[:, 0],
                dy=fam.dy[:, 0, col] * E[:, 0],
                log_scale=float(S[0]),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Public single-point wrappers


def _prep(q: Potential, p: SpectralPoint, grid_spec, extra_required):
    spec = grid_spec or GridSpec()
    grid = solver_grid(q, abs(p.rho), spec, extra_required)
    return spec, grid


def integrate_ivp(
    q: Potential,
    p: SpectralPoint,
    x0: float,
    y0: complex,
    dy0: complex,
    grid_spec: GridSpec | None = None,
    extra_required=(),
) -> SolutionTrace:
    """Solve -y'' + q y = lambda y with y(x0)=y0, y'(x0)=dy0, x0 an endpoint of [0, T]."""
    for v in (y0, dy0):
        if not np.isfinite(complex(v)):
            raise InputError("initial data must be finite")
    T = q.T
    if abs(x0) <= _EDGE_TOL * max(1.0, T):
        side = "X"
    elif abs(x0 - T) <= _EDGE_TOL * max(1.0, T):
        side = "Z"
    else:
        raise InputError(f"x0 must be an endpoint of [0, {T}], got {x0}")
    spec, grid = _prep(q, p, grid_spec, extra_required)
    fam = integrate_family(
        q,
        [p.lam],
        side,
        grid,
        spec,
        store="yd",
        init=(np.asarray([[y0]], dtype=complex), np.asarray([[dy0]], dtype=complex)),
    )
    return _traces_from_store(fam)[0]


def fundamental_X(
    q: Potential,
    p: SpectralPoint,
    grid_spec: GridSpec | None = None,
    extra_required=(),
) -> tuple[SolutionTrace, SolutionTrace]:
    """(X1, X2) with X1(0)=X2'(0)=1, X1'(0)=X2(0)=0."""
    spec, grid = _prep(q, p, grid_spec, extra_required)
    fam = integrate_family(q, [p.lam], "X", grid, spec, store="yd")
    t = _traces_from_store(fam)
    return t[0], t[1]


def fundamental_Z(
    q: Potential,
    p: SpectralPoint,
    grid_spec: GridSpec | None = None,
    extra_required=(),
) -> tuple[SolutionTrace, SolutionTrace]:
    """(Z1, Z2) with Z1(T)=Z2'(T)=1, Z1'(T)=Z2(T)=0."""
    spec, grid = _prep(q, p, grid_spec, extra_required)
    fam = integrate_family(q, [p.lam], "Z", grid, spec, store="yd")
    t = _traces_from_store(fam)
    return t[0], t[1]


def modulus_scale(lam, T: float):
    """Natural magnitude envelope (1+|lambda|)^(1/2) * exp(Im rho * T) of characteristic values."""
    arr = np.asarray(lam, dtype=complex)
    tau = np.atleast_1d(principal_rho(arr)).imag
    e = np.clip(tau * T, -700.0, 700.0)
    out = (1.0 + np.abs(np.atleast_1d(arr))) ** 0.5 * np.exp(e)
    return float(out[0]) if arr.ndim == 0 else out
