"""Zero location for entire characteristic functions in lambda rectangles.

Counting uses the argument principle on the rectangle boundary: the winding
number accumulates phase increments of sampled values, with offending
segments refined until every increment is below pi/2, which makes the count
unambiguous.  A logarithmic-derivative quadrature (derivative by central
differences over the same samples) cross-checks the integer; its residue must
stay below 0.1.  Boxes whose boundary passes too close to a zero are inflated
by 1% steps and retried.  Located boxes are reduced by long-side bisection
with a count-conservation retry at shifted split fractions, and the surviving
single-zero boxes are polished by damped Newton steps seeded with the first
contour moment.

A real-axis fast path scans sign changes of a handle that is real-valued on
the real axis and refines each bracket with a safeguarded secant.  It assumes
the spectrum in the window is real and simple, which holds for the Dirichlet
style problems used by the reconstruction drivers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .characteristic import ProblemSpec, char_handle
from .errors import ContourError, InputError
from .ode_core import GridSpec, modulus_scale

_MAX_CONTOUR_POINTS = 20000
_DIP_FLOOR = 1e-3
_MAX_NUDGE = 5
_SPLIT_FRACTIONS = (0.5, 0.45, 0.55, 0.42, 0.58)


@dataclass(frozen=True)
class SearchBox:
    """Closed lambda rectangle with contour sampling and subdivision limits."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_samples: int = 64
    max_depth: int = 48

    def __post_init__(self):
        vals = (self.re_min, self.re_max, self.im_min, self.im_max)
        if not all(np.isfinite(v) for v in vals):
            raise InputError("box corners must be finite")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise InputError("box must have positive width and height")
        if self.n_samples < 8:
            raise InputError("need at least 8 contour samples per edge")

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def center(self) -> complex:
        return complex((self.re_min + self.re_max) / 2, (self.im_min + self.im_max) / 2)

    @property
    def diag(self) -> float:
        return float(np.hypot(self.width, self.height))

    def inflated(self, factor: float) -> "SearchBox":
        c = self.center
        hw, hh = self.width * factor / 2, self.height * factor / 2
        return SearchBox(
            c.real - hw, c.real + hw, c.imag - hh, c.imag + hh, self.n_samples, self.max_depth
        )

    def split(self, fraction: float):
        """Two children across the longer side at the given fraction."""
        if self.width >= self.height:
            cut = self.re_min + fraction * self.width
            return (
                SearchBox(self.re_min, cut, self.im_min, self.im_max, self.n_samples, self.max_depth),
                SearchBox(cut, self.re_max, self.im_min, self.im_max, self.n_samples, self.max_depth),
            )
        cut = self.im_min + fraction * self.height
        return (
            SearchBox(self.re_min, self.re_max, self.im_min, cut, self.n_samples, self.max_depth),
            SearchBox(self.re_min, self.re_max, cut, self.im_max, self.n_samples, self.max_depth),
        )

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (
            self.re_min - pad <= z.real <= self.re_max + pad
            and self.im_min - pad <= z.imag <= self.im_max + pad
        )


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with multiplicities found inside a search box."""

    entries: tuple
    source: str
    box: SearchBox
    winding_total: int

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.asarray([e[0] for e in self.entries], dtype=complex)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.asarray([e[1] for e in self.entries], dtype=int)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


class _ContourResult(NamedTuple):
    winding: int
    points: np.ndarray
    values: np.ndarray
    arg_steps: np.ndarray
    box_used: SearchBox


def _contour_points(box: SearchBox, n: int) -> np.ndarray:
    c0 = complex(box.re_min, box.im_min)
    c1 = complex(box.re_max, box.im_min)
    c2 = complex(box.re_max, box.im_max)
    c3 = complex(box.re_min, box.im_max)
    parts = []
    for a, b in ((c0, c1), (c1, c2), (c2, c3), (c3, c0)):
        t = np.linspace(0.0, 1.0, n, endpoint=False)
        parts.append(a + t * (b - a))
    return np.concatenate(parts)


def _eval(f: Callable, pts: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(pts), dtype=complex)
    if vals.shape != pts.shape:
        raise InputError("handle must return one value per lambda")
    if not np.all(np.isfinite(vals)):
        raise ContourError("handle returned non-finite values on the contour")
    return vals


def _quadrature_winding(pts: np.ndarray, vals: np.ndarray) -> float:
    zp = np.roll(pts, -1)
    zm = np.roll(pts, 1)
    fp = (np.roll(vals, -1) - np.roll(vals, 1)) / (zp - zm)
    dz = (zp - zm) / 2.0
    total = np.sum(fp / vals * dz)
    return float((total / (2j * np.pi)).real)


def _winding(f: Callable, box: SearchBox, max_refine: int = 9) -> _ContourResult:
    for nudge in range(_MAX_NUDGE + 1):
        used = box if nudge == 0 else box.inflated(1.01**nudge)
        pts = _contour_points(used, used.n_samples)
        vals = _eval(f, pts)
        dipped = False
        for _ in range(max_refine + 1):
            absv = np.abs(vals)
            med = float(np.median(absv))
            if med == 0.0 or absv.min() < _DIP_FLOOR * med:
                dipped = True
                break
            with np.errstate(invalid="ignore"):
                steps = np.angle(np.roll(vals, -1) / vals)
            bad = np.abs(steps) >= np.pi / 2
            if not bad.any():
                w = int(round(float(steps.sum() / (2 * np.pi))))
                if w < 0:
                    raise ContourError("negative winding: handle is not analytic inside the box")
                resid = abs(_quadrature_winding(pts, vals) - w)
                if resid < 0.1:
                    return _ContourResult(w, pts, vals, steps, used)
                bad = np.ones(len(pts), dtype=bool)  # quadrature disagrees: refine everywhere
            if len(pts) >= _MAX_CONTOUR_POINTS:
                raise ContourError(
                    f"contour refinement exhausted at {len(pts)} samples on {used}"
                )
            idx = np.nonzero(bad)[0]
            mids = (pts[idx] + pts[(idx + 1) % len(pts)]) / 2.0
            mvals = _eval(f, mids)
            pts = np.insert(pts, idx + 1, mids)
            vals = np.insert(vals, idx + 1, mvals)
        if not dipped:
            break
    raise ContourError("a zero stays too close to the contour after the allowed nudges")


def count_zeros(f: Callable, box: SearchBox) -> int:
    """Number of zeros (with multiplicity) of an entire handle inside the box."""
    return _winding(f, box).winding


def _moment_seed(cr: _ContourResult) -> complex:
    """First contour moment: the mean of the enclosed zeros."""
    if cr.winding == 0:
        return cr.box_used.center
    zp = np.roll(cr.points, -1)
    mid = (cr.points + zp) / 2.0
    dlog = np.log(np.abs(np.roll(cr.values, -1) / cr.values)) + 1j * cr.arg_steps
    mu = np.sum(mid * dlog) / (2j * np.pi * cr.winding)
    if not np.isfinite(mu):
        return cr.box_used.center
    return complex(mu)


def _batched_newton(f, seeds, mults, diags, tol, scale_fn, max_rounds=60):
    z = np.asarray(seeds, dtype=complex)
    m = np.asarray(mults, dtype=float)
    lim = np.asarray(diags, dtype=float)
    best = z.copy()
    best_f = np.abs(_eval(f, z))
    active = np.ones(len(z), dtype=bool)
    for _ in range(max_rounds):
        if not active.any():
            break
        za = z[active]
        h = 1e-6 * (1.0 + np.abs(za))
        allpts = np.concatenate([za - h, za + h, za])
        vals = _eval(f, allpts)
        k = len(za)
        vm, vp, v0 = vals[:k], vals[k : 2 * k], vals[2 * k :]
        fp = (vp - vm) / (2.0 * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = m[active] * v0 / fp
        step = np.where(np.isfinite(step), step, 0.0)
        too_big = np.abs(step) > lim[active]
        step = np.where(too_big, step * lim[active] / np.maximum(np.abs(step), 1e-300), step)
        z_new = za - step
        improved = np.abs(v0) < best_f[active]
        ba = best[active]
        bf = best_f[active]
        ba[improved] = za[improved]
        bf[improved] = np.abs(v0)[improved]
        best[active] = ba
        best_f[active] = bf
        zz = z.copy()
        zz[active] = z_new
        z = zz
        done = np.abs(step) <= 1e-13 * (1.0 + np.abs(z_new))
        done |= np.abs(v0) <= 1e-3 * tol * np.asarray(scale_fn(za), dtype=float)
        aa = active.copy()
        aa[np.nonzero(active)[0][done]] = False
        active = aa
    final_f = np.abs(_eval(f, z))
    use_final = final_f < best_f
    best[use_final] = z[use_final]
    return best


def find_spectrum(
    f: Callable,
    box: SearchBox,
    tol: float = 1e-8,
    *,
    source: str = "f",
    scale: Callable | None = None,
    f_polish: Callable | None = None,
    real_axis: bool = False,
    rho_gap_hint: float | None = None,
) -> Spectrum:
    """All zeros of the handle inside the box, refined to |f| <= tol * scale.

    `f` is used for counting; `f_polish` (default: f) for refinement and the
    final residual check.  `scale(lambda)` sets the natural magnitude of the
    handle, defaulting to (1 + |lambda|)^(1/2).
    """
    scale_fn = scale if scale is not None else (lambda z: (1.0 + np.abs(z)) ** 0.5)
    fp = f_polish if f_polish is not None else f
    if real_axis:
        return _real_axis_spectrum(f, fp, box, tol, source, scale_fn, rho_gap_hint)

    root = _winding(f, box)
    leaves = []
    stack = [(box, root, 0)]
    floor = max(tol, 1e-10)
    while stack:
        b, cr, depth = stack.pop()
        if cr.winding == 0:
            continue
        splittable = depth < box.max_depth and b.diag > floor * (1.0 + abs(b.center))
        if cr.winding == 1 or not splittable:
            leaves.append((b, cr))
            continue
        for frac in _SPLIT_FRACTIONS:
            c1, c2 = b.split(frac)
            try:
                r1 = _winding(f, c1)
                r2 = _winding(f, c2)
            except ContourError:
                continue  # a zero sits on this cut line; try the next fraction
            if r1.winding + r2.winding == cr.winding:
                stack.append((c1, r1, depth + 1))
                stack.append((c2, r2, depth + 1))
                break
        else:
            # every candidate cut is pinned; a zero cluster tighter than the
            # remaining box cannot be separated, so report it as one leaf
            leaves.append((b, cr))

    if not leaves:
        return Spectrum(entries=(), source=source, box=box, winding_total=root.winding)

    seeds = [_moment_seed(cr) for _, cr in leaves]
    mults = [cr.winding for _, cr in leaves]
    diags = [b.diag for b, _ in leaves]
    roots = _batched_newton(fp, seeds, mults, diags, tol, scale_fn)

    resid = np.abs(_eval(fp, roots))
    allowed = tol * np.asarray(scale_fn(roots), dtype=float)
    bad = resid > allowed
    if bad.any():
        i = int(np.argmax(resid / allowed))
        raise ContourError(
            f"refinement stalled: |{source}({roots[i]:.8g})| = {resid[i]:.3e} "
            f"exceeds {allowed[i]:.3e}"
        )

    merged: list[list] = []
    for r, m in sorted(zip(roots, mults), key=lambda t: (t[0].real, t[0].imag)):
        if merged and abs(r - merged[-1][0]) <= 10.0 * tol * (1.0 + abs(r)):
            merged[-1][1] += m
        else:
            merged.append([complex(r), int(m)])
    entries = tuple((r, m) for r, m in merged)
    return Spectrum(entries=entries, source=source, box=box, winding_total=root.winding)


def _real_axis_spectrum(f_scan, f_polish, box, tol, source, scale_fn, rho_gap_hint):
    lo, hi = box.re_min, box.re_max
    t_lo = -np.sqrt(-lo) if lo < 0 else np.sqrt(lo)
    t_hi = -np.sqrt(-hi) if hi < 0 else np.sqrt(hi)
    gap = rho_gap_hint if rho_gap_hint else max((t_hi - t_lo) / 256.0, 1e-3)
    n = max(64, int(np.ceil((t_hi - t_lo) / (gap / 16.0))) + 1)
    ts = np.linspace(t_lo, t_hi, n)
    lams = np.sign(ts) * ts * ts

    def real_values(handle, arr):
        v = np.asarray(handle(arr + 0j), dtype=complex)
        bound = 1e-6 * (np.abs(v) + 1.0)
        if np.any(np.abs(v.imag) > bound):
            raise InputError("handle is not real-valued on the real axis")
        return v.real

    vs = real_values(f_scan, lams)
    sign_change = np.nonzero((vs[:-1] * vs[1:] < 0))[0]
    exact = np.nonzero(vs == 0)[0]

    a = lams[sign_change]
    b = lams[sign_change + 1]
    fa = vs[sign_change]
    fb = vs[sign_change + 1]
    for round_ in range(60):
        widths = b - a
        if np.all(widths <= 1e-6 * (1.0 + np.abs(a))):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            x = b - fb * (b - a) / (fb - fa)
        mid = (a + b) / 2.0
        use_mid = ~np.isfinite(x) | (x <= a + 0.05 * widths) | (x >= b - 0.05 * widths)
        if round_ % 3 == 2:
            use_mid |= True
        x = np.where(use_mid, mid, x)
        fx = real_values(f_scan, x)
        hit = fx == 0.0
        left = np.sign(fx) == np.sign(fa)
        a = np.where(hit, x, np.where(left, x, a))
        fa = np.where(hit, 0.0, np.where(left, fx, fa))
        b = np.where(hit, x, np.where(left, b, x))
        fb = np.where(hit, 0.0, np.where(left, fb, fx))

    seeds = np.concatenate([(a + b) / 2.0, lams[exact]])
    if len(seeds) == 0:
        return Spectrum(entries=(), source=source, box=box, winding_total=0)
    widths = np.concatenate([b - a, np.full(len(exact), 1e-6)])
    roots = _batched_newton(
        f_polish, seeds.astype(complex), np.ones(len(seeds)), 1e3 * widths + 1e-9, tol, scale_fn,
        max_rounds=12,
    )
    resid = np.abs(_eval(f_polish, roots))
    allowed = tol * np.asarray(scale_fn(roots), dtype=float)
    if np.any(resid > allowed):
        i = int(np.argmax(resid / allowed))
        raise ContourError(
            f"real-axis refinement stalled: |{source}({roots[i].real:.8g})| = "
            f"{resid[i]:.3e} exceeds {allowed[i]:.3e}"
        )
    order = np.argsort(roots.real)
    entries = tuple((complex(roots[i].real), 1) for i in order)
    return Spectrum(entries=entries, source=source, box=box, winding_total=len(entries))


def problem_spectrum(
    spec: ProblemSpec,
    which: str,
    box: SearchBox,
    grid_spec: GridSpec | None = None,
    tol: float = 1e-8,
    real_axis: bool = False,
) -> Spectrum:
    """Spectrum of one characteristic function of the problem inside the box.

    Counting runs on a grid tolerance of 1e-8 and refinement on 1e-10
    (or the supplied grid_spec, never loosened for refinement).
    """
    base = grid_spec or GridSpec(tol=1e-10)
    f_scan = char_handle(spec, which, base.coarsened(1e-8))
    f_fine = char_handle(spec, which, base)
    return find_spectrum(
        f_scan,
        box,
        tol,
        source=which,
        scale=lambda z: modulus_scale(z, spec.T),
        f_polish=f_fine,
        real_axis=real_axis,
        rho_gap_hint=np.pi / spec.T,
    )


@dataclass(frozen=True)
class ConditionReport:
    """Disjointness report between two computed zero sets."""

    holds: bool
    min_gap: float
    witness: tuple | None
    n_first: int
    n_second: int
    separation_tol: float


def _disjointness(first: Spectrum, second: Spectrum, separation_tol: float) -> ConditionReport:
    za = first.eigenvalues
    zb = second.eigenvalues
    if len(za) == 0 or len(zb) == 0:
        return ConditionReport(True, float("inf"), None, len(za), len(zb), separation_tol)
    d = np.abs(za[:, None] - zb[None, :])
    i, j = np.unravel_index(int(np.argmin(d)), d.shape)
    gap = float(d[i, j])
    return ConditionReport(
        holds=gap > separation_tol,
        min_gap=gap,
        witness=(complex(za[i]), complex(zb[j])),
        n_first=len(za),
        n_second=len(zb),
        separation_tol=separation_tol,
    )


def condition_S(
    spec: ProblemSpec,
    box: SearchBox,
    separation_tol: float,
    grid_spec: GridSpec | None = None,
    tol: float = 1e-8,
    real_axis: bool = False,
) -> ConditionReport:
    """Whether the fully nonlocal spectrum avoids the zeros of delta_1 on the box.

    The same check with a two-point problem (forms y(0), y(a)) is the
    disjointness condition of the three-spectra setting, since there the
    zero sets are the Dirichlet spectra on (0, a) and (0, T).
    """
    xi = problem_spectrum(spec, "omega", box, grid_spec, tol, real_axis)
    l1 = problem_spectrum(spec, "delta1", box, grid_spec, tol, real_axis)
    return _disjointness(xi, l1, separation_tol)
