"""Bounded-variation measures on [0, T] and the linear forms they induce.

A measure is a point mass at 0, finitely many atoms in (0, T], and an
absolutely continuous part with piecewise-linear density:

    sigma = jump_at_zero * delta_0 + sum_i w_i * delta_{t_i} + d(t) dt.

Integrating a sampled function f against sigma realizes the nonlocal form

    U(f) = jump_at_zero * f(0) + sum_i w_i * f(t_i) + int_0^T f(t) d(t) dt.

The absolutely continuous term is evaluated by composite trapezoid on the
union of the sample grid and the density breakpoints.  Atoms are never
interpolated: f must carry exact samples at every atom location.

The density is stored as a list of linear segments (lo, hi, v_lo, v_hi),
zero outside the segments.  Segments may touch with different one-sided
values, so sums and truncations of densities stay exactly representable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError

_EDGE_TOL = 1e-12


def _close(a: float, b: float, scale: float = 1.0) -> bool:
    return abs(a - b) <= _EDGE_TOL * max(1.0, scale)


@dataclass(frozen=True)
class BVMeasure:
    """Complex measure of bounded variation on [0, T]."""

    domain_length: float
    jump_at_zero: complex = 0j
    atoms: tuple[tuple[float, complex], ...] = ()
    # (lo, hi, value_at_lo, value_at_hi), ascending, non-overlapping, zero elsewhere
    density_segments: tuple[tuple[float, float, complex, complex], ...] = ()

    def __post_init__(self):
        T = self.domain_length
        if not np.isfinite(T) or T <= 0:
            raise InputError(f"domain length must be positive and finite, got {T}")
        object.__setattr__(self, "jump_at_zero", complex(self.jump_at_zero))
        atoms = tuple((float(t), complex(w)) for t, w in self.atoms)
        prev = 0.0
        for t, _ in atoms:
            if t <= 0 or t > T + _EDGE_TOL * max(1.0, T):
                raise InputError(f"atom location {t} outside (0, T], T={T}")
            if t <= prev:
                raise InputError("atom locations must be strictly increasing")
            prev = t
        object.__setattr__(self, "atoms", atoms)
        segs = []
        prev_hi = 0.0
        for lo, hi, vlo, vhi in self.density_segments:
            lo, hi = float(lo), float(hi)
            if lo >= hi:
                continue  # zero-width pieces carry no mass
            if lo < -_EDGE_TOL or hi > T + _EDGE_TOL * max(1.0, T):
                raise InputError(f"density segment [{lo}, {hi}] outside [0, T], T={T}")
            if lo < prev_hi - _EDGE_TOL:
                raise InputError("density segments must be ascending and non-overlapping")
            segs.append((lo, hi, complex(vlo), complex(vhi)))
            prev_hi = hi
        object.__setattr__(self, "density_segments", tuple(segs))

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_jump(cls, T: float, jump: complex) -> "BVMeasure":
        return cls(domain_length=T, jump_at_zero=jump)

    @classmethod
    def from_atoms(cls, T: float, atoms, jump: complex = 0j) -> "BVMeasure":
        return cls(domain_length=T, jump_at_zero=jump, atoms=tuple(atoms))

    @classmethod
    def with_density(cls, T: float, breakpoints, values, jump: complex = 0j, atoms=()) -> "BVMeasure":
        """Density given by nodal values on breakpoints; repeated breakpoints encode jumps."""
        bp = [float(b) for b in breakpoints]
        vals = [complex(v) for v in values]
        if len(bp) != len(vals):
            raise InputError("breakpoints and values must have equal length")
        if len(bp) < 2:
            raise InputError("density needs at least two breakpoints")
        segs = []
        for i in range(len(bp) - 1):
            if bp[i + 1] < bp[i]:
                raise InputError("density breakpoints must be non-decreasing")
            segs.append((bp[i], bp[i + 1], vals[i], vals[i + 1]))
        return cls(domain_length=T, jump_at_zero=jump, atoms=tuple(atoms), density_segments=tuple(segs))

    # -- basic queries -----------------------------------------------------

    @property
    def has_density(self) -> bool:
        return bool(self.density_segments)

    @property
    def is_real(self) -> bool:
        if self.jump_at_zero.imag != 0.0:
            return False
        if any(w.imag != 0.0 for _, w in self.atoms):
            return False
        return all(vlo.imag == 0.0 and vhi.imag == 0.0 for _, _, vlo, vhi in self.density_segments)

    @property
    def support_end(self) -> float:
        """Largest t where the restriction to [0, t] still changes (0 for a pure jump)."""
        end = 0.0
        if self.atoms:
            end = max(end, self.atoms[-1][0])
        if self.density_segments:
            end = max(end, self.density_segments[-1][1])
        return end

    def required_points(self) -> np.ndarray:
        """Sample locations a grid must contain to integrate exactly against this measure."""
        pts = [0.0] + [t for t, _ in self.atoms]
        for lo, hi, _, _ in self.density_segments:
            pts.extend((lo, hi))
        return np.unique(np.asarray(pts, dtype=float))

    def total_variation(self, quad_points: int = 65) -> float:
        """|jump| + sum |atom weights| + int |density|; density term by quadrature."""
        tv = abs(self.jump_at_zero) + sum(abs(w) for _, w in self.atoms)
        for lo, hi, vlo, vhi in self.density_segments:
            s = np.linspace(0.0, 1.0, quad_points)
            mags = np.abs(vlo + (vhi - vlo) * s)
            tv += float(np.trapezoid(mags, dx=(hi - lo) / (quad_points - 1)))
        return float(tv)

    # -- transformations ---------------------------------------------------

    def truncate(self, a: float) -> "BVMeasure":
        """Measure equal to this one on [0, a] and zero on (a, T]."""
        T = self.domain_length
        if not (0.0 < a <= T + _EDGE_TOL * max(1.0, T)):
            raise InputError(f"truncation point {a} outside (0, T], T={T}")
        atoms = tuple((t, w) for t, w in self.atoms if t <= a + _EDGE_TOL * max(1.0, T))
        segs = []
        for lo, hi, vlo, vhi in self.density_segments:
            if lo >= a:
                break
            if hi <= a:
                segs.append((lo, hi, vlo, vhi))
            else:
                frac = (a - lo) / (hi - lo)
                segs.append((lo, a, vlo, vlo + (vhi - vlo) * frac))
        return BVMeasure(T, self.jump_at_zero, atoms, tuple(segs))

    def window(self, lo: float, hi: float) -> "BVMeasure":
        """Restriction to (lo, hi]: atoms in (lo, hi], density clipped, no jump term."""
        T = self.domain_length
        if not (0.0 <= lo < hi <= T + _EDGE_TOL * max(1.0, T)):
            raise InputError(f"window ({lo}, {hi}] invalid for T={T}")
        atoms = tuple((t, w) for t, w in self.atoms if lo < t <= hi + _EDGE_TOL * max(1.0, T))
        segs = []
        for slo, shi, vlo, vhi in self.density_segments:
            clo, chi = max(slo, lo), min(shi, hi)
            if clo >= chi:
                continue
            width = shi - slo
            seg_vlo = vlo + (vhi - vlo) * (clo - slo) / width
            seg_vhi = vlo + (vhi - vlo) * (chi - slo) / width
            segs.append((clo, chi, seg_vlo, seg_vhi))
        return BVMeasure(T, 0j, atoms, tuple(segs))

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {"jump": [self.jump_at_zero.real, self.jump_at_zero.imag]}
        if self.atoms:
            d["atoms"] = [[t, [w.real, w.imag]] for t, w in self.atoms]
        if self.density_segments:
            bp, vals = [], []
            for lo, hi, vlo, vhi in self.density_segments:
                if not bp or not _close(bp[-1], lo) or vals[-1] != [vlo.real, vlo.imag]:
                    bp.append(lo)
                    vals.append([vlo.real, vlo.imag])
                bp.append(hi)
                vals.append([vhi.real, vhi.imag])
            d["density"] = {"breakpoints": bp, "values": vals}
        return d

    @classmethod
    def from_dict(cls, d: dict, T: float) -> "BVMeasure":
        jump = complex(*d.get("jump", [0.0, 0.0]))
        atoms = tuple((t, complex(*w)) for t, w in d.get("atoms", []))
        dens = d.get("density")
        if dens is None:
            return cls(T, jump, atoms)
        vals = [complex(v[0], v[1]) for v in dens["values"]]
        return cls.with_density(T, dens["breakpoints"], vals, jump=jump, atoms=atoms)


def merge(m1: BVMeasure, m2: BVMeasure) -> BVMeasure:
    """Measure-sum: integrates any f to I(f, m1) + I(f, m2)."""
    if not _close(m1.domain_length, m2.domain_length, m1.domain_length):
        raise DomainError(
            f"cannot merge measures on different domains ({m1.domain_length} vs {m2.domain_length})"
        )
    atoms: dict[float, complex] = {}
    for t, w in m1.atoms + m2.atoms:
        hit = next((s for s in atoms if _close(s, t, m1.domain_length)), None)
        if hit is None:
            atoms[t] = w
        else:
            atoms[hit] += w
    seg_edges = sorted(
        {e for lo, hi, _, _ in m1.density_segments + m2.density_segments for e in (lo, hi)}
    )
    segs = []
    for lo, hi in zip(seg_edges[:-1], seg_edges[1:]):
        if hi - lo <= _EDGE_TOL:
            continue
        vlo = _density_inside(m1, lo, hi, lo) + _density_inside(m2, lo, hi, lo)
        vhi = _density_inside(m1, lo, hi, hi) + _density_inside(m2, lo, hi, hi)
        if vlo != 0 or vhi != 0:
            segs.append((lo, hi, vlo, vhi))
    return BVMeasure(
        m1.domain_length,
        m1.jump_at_zero + m2.jump_at_zero,
        tuple(sorted(atoms.items())),
        tuple(segs),
    )


def _density_inside(m: BVMeasure, cell_lo: float, cell_hi: float, x: float) -> complex:
    """Density value at x, taking limits from within the cell (cell_lo, cell_hi)."""
    mid = 0.5 * (cell_lo + cell_hi)
    for lo, hi, vlo, vhi in m.density_segments:
        if lo <= mid <= hi:
            return vlo + (vhi - vlo) * (x - lo) / (hi - lo)
    return 0j


def density_node_weights(m: BVMeasure, x: np.ndarray) -> np.ndarray:
    """Trapezoid weights W with int f*density ~= sum_i W_i f(x_i).

    Requires every segment edge to be a node of x; one-sided density values at
    segment edges are resolved from within each cell, so densities with jumps
    integrate consistently.
    """
    x = np.asarray(x, dtype=float)
    W = np.zeros(x.shape, dtype=complex)
    scale = max(1.0, m.domain_length)
    for lo, hi, vlo, vhi in m.density_segments:
        i_lo = int(np.searchsorted(x, lo - _EDGE_TOL * scale))
        i_hi = int(np.searchsorted(x, hi - _EDGE_TOL * scale))
        if i_lo >= len(x) or not _close(x[i_lo], lo, scale) or i_hi >= len(x) or not _close(x[i_hi], hi, scale):
            raise InputError(
                f"sample grid is missing a density breakpoint of the measure ({lo} or {hi})"
            )
        xe = x[i_lo : i_hi + 1]
        dvals = vlo + (vhi - vlo) * (xe - lo) / (hi - lo)
        h = np.diff(xe)
        W[i_lo:i_hi] += 0.5 * h * dvals[:-1]
        W[i_lo + 1 : i_hi + 1] += 0.5 * h * dvals[1:]
    return W


def _atom_indices(m: BVMeasure, x: np.ndarray) -> list[int]:
    scale = max(1.0, m.domain_length)
    idxs = []
    for t, _ in m.atoms:
        i = int(np.searchsorted(x, t - _EDGE_TOL * scale))
        if i >= len(x) or not _close(x[i], t, scale):
            raise InputError(f"function not sampled at atom location t={t}; refusing to interpolate")
        idxs.append(i)
    return idxs


def _interp_complex(xq: np.ndarray, x: np.ndarray, fx: np.ndarray) -> np.ndarray:
    return np.interp(xq, x, fx.real) + 1j * np.interp(xq, x, fx.imag)


def stieltjes_integrate(x: np.ndarray, fx: np.ndarray, m: BVMeasure) -> complex:
    """int_0^T f dsigma for f sampled on the grid x (piecewise-linear between nodes)."""
    x = np.asarray(x, dtype=float)
    fx = np.asarray(fx, dtype=complex)
    if x.ndim != 1 or x.shape != fx.shape or len(x) < 2:
        raise InputError("need matching 1-d arrays with at least two samples")
    if np.any(np.diff(x) <= 0):
        raise InputError("sample grid must be strictly increasing")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(fx)):
        raise InputError("samples must be finite")
    scale = max(1.0, m.domain_length)
    if not _close(x[0], 0.0, scale) or not _close(x[-1], m.domain_length, scale):
        raise DomainError(
            f"sample grid spans [{x[0]}, {x[-1]}] but the measure lives on [0, {m.domain_length}]"
        )

    total = m.jump_at_zero * fx[0]
    for i, (_, w) in zip(_atom_indices(m, x), m.atoms):
        total += w * fx[i]
    if m.has_density:
        edges = [e for lo, hi, _, _ in m.density_segments for e in (lo, hi)]
        u = np.unique(np.concatenate([x, np.asarray(edges)]))
        # keep edge values exact: drop near-duplicates in favor of the later entry
        keep = np.concatenate([np.diff(u) > _EDGE_TOL * scale, [True]])
        u = u[keep]
        fu = _interp_complex(u, x, fx)
        total += complex(np.dot(density_node_weights(m, u), fu))
    return complex(total)


# ----------------------------------------------------------------------------
# Linear forms


@dataclass(frozen=True)
class LinearForm:
    """A linear form acting on solutions: Stieltjes integral or point value.

    kind "nonlocal":    U(y) = int y dsigma         (measure required)
    kind "point_value": U(y) = y^(order)(x0), order in {0, 1}
    """

    kind: str
    measure: BVMeasure | None = None
    x0: float | None = None
    order: int = 0

    def __post_init__(self):
        if self.kind == "nonlocal":
            if self.measure is None:
                raise InputError("nonlocal form needs a measure")
        elif self.kind == "point_value":
            if self.x0 is None or self.x0 < 0:
                raise InputError("point form needs x0 >= 0")
            if self.order not in (0, 1):
                raise InputError("point form order must be 0 or 1")
        else:
            raise InputError(f"unknown form kind {self.kind!r}")

    @classmethod
    def from_measure(cls, measure: BVMeasure) -> "LinearForm":
        return cls(kind="nonlocal", measure=measure)

    @classmethod
    def point_value(cls, x0: float, order: int = 0) -> "LinearForm":
        return cls(kind="point_value", x0=float(x0), order=order)

    @property
    def jump_coefficient(self) -> complex:
        """Weight of y(0) in the form; the H coefficient of the general theory."""
        if self.kind == "nonlocal":
            return self.measure.jump_at_zero
        return 1.0 + 0j if (self.x0 == 0.0 and self.order == 0) else 0j

    @property
    def support_end(self) -> float:
        if self.kind == "nonlocal":
            return self.measure.support_end
        return self.x0

    @property
    def is_real(self) -> bool:
        return self.measure.is_real if self.kind == "nonlocal" else True

    def required_points(self, T: float) -> np.ndarray:
        if self.kind == "nonlocal":
            return self.measure.required_points()
        return np.asarray([self.x0], dtype=float)

    def apply_sampled(self, x: np.ndarray, y: np.ndarray, dy: np.ndarray | None = None) -> complex:
        """Apply to a function sampled on x (dy needed only for order-1 point forms)."""
        if self.kind == "nonlocal":
            return stieltjes_integrate(x, y, self.measure)
        x = np.asarray(x, dtype=float)
        i = int(np.searchsorted(x, self.x0 - _EDGE_TOL))
        if i >= len(x) or not _close(x[i], self.x0, max(1.0, x[-1])):
            raise InputError(f"function not sampled at x0={self.x0}")
        if self.order == 0:
            return complex(y[i])
        if dy is None:
            raise InputError("derivative samples required for an order-1 point form")
        return complex(dy[i])

    def to_dict(self) -> dict:
        if self.kind == "nonlocal":
            return {"type": "nonlocal", "measure": self.measure.to_dict()}
        return {"type": "point", "x": self.x0, "order": self.order}

    @classmethod
    def from_dict(cls, d: dict, T: float) -> "LinearForm":
        if d["type"] == "nonlocal":
            return cls.from_measure(BVMeasure.from_dict(d["measure"], T))
        return cls.point_value(d["x"], d.get("order", 0))
