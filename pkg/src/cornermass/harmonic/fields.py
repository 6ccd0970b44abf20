"""Grid-sampled axisymmetric fields and their covariant derivatives.

The solver works in a general radial chart: the metric on the grid is

    g = lam(s) ds^2 + rho(s)^2 dOmega^2,

with the areal chart (lam = 1/f, rho = s) used for glued patch data and
an isotropic chart (lam = psi^4, rho = s psi^2) used when the data set
carries one; the latter continues through a minimal sphere into the
second asymptotic sheet, where large coordinate spheres are weakly
trapped and can serve as the inner boundary of the solve.

Angular finite differences act on x = cos(theta), where 3-point stencils
differentiate the asymptote rho cos(theta) exactly in the flat case;
radial stencils never cross a corner (corner nodes terminate every
stencil, with one-sided values kept per side), so kinks in the profiles
are never differenced.

Covariant Hessian, orthonormal frame (e_s, e_th, e_ph):

    T_ss = (u_ss - (lam'/2 lam) u_s) / lam
    T_st = -(sin th / (sqrt(lam) rho)) (u_sx - (rho'/rho) u_x)
    T_tt = ((1-x^2) u_xx - x u_x)/rho^2 + (rho'/(lam rho)) u_s
    T_pp = (rho'/(lam rho)) u_s - x u_x / rho^2

and the spacetime Hessian adds |grad u| k = |grad u| diag(a, b, b).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from ..corner import GluedDataSet, areal_sigma
from ..numgrid import AxisymGrid, stencil_d1, stencil_d2


# ---------------------------------------------------------------------------
# Solver grids
# ---------------------------------------------------------------------------

def _segment_nodes(lo, hi, n, anchor=None):
    """n+1 nodes on [lo, hi]: log-spaced, or uniform in sqrt(s - anchor)."""
    if anchor is not None and anchor < lo:
        t0, t1 = np.sqrt(lo - anchor), np.sqrt(hi - anchor)
        t = np.linspace(t0, t1, n + 1)
        nodes = anchor + t * t
        nodes[0], nodes[-1] = lo, hi
        return nodes
    nodes = np.exp(np.linspace(np.log(lo), np.log(hi), n + 1))
    nodes[0], nodes[-1] = lo, hi
    return nodes


def build_solver_grid(data: GluedDataSet, n_r, n_theta, L,
                      r_inner=None) -> AxisymGrid:
    """Radial nodes from the inner radius to the truncation.

    For data carrying an isotropic chart the nodes are log-spaced in the
    chart coordinate from sigma_inner deep in the second sheet out to
    sigma(L); otherwise corner radii land exactly on nodes, data with a
    smooth centre gets an innermost node one spacing above r = 0, and a
    grading anchor yields sqrt-graded spacing.
    """
    if data.chart is not None:
        m = data.chart.mass
        sig_hi = areal_sigma(m, L)
        # default inner boundary: a weakly trapped sphere just inside the
        # minimal surface (theta_+ < 0 there)
        sig_lo = r_inner if r_inner is not None else 0.25 * m
        nodes = np.exp(np.linspace(np.log(sig_lo), np.log(sig_hi), n_r + 1))
        return AxisymGrid.build(nodes, n_theta)
    if L > data.r_max + 1e-9:
        raise ValueError("truncation radius exceeds the data set")
    if r_inner is None:
        if data.has_center:
            # innermost ring well below the first break; the virtual
            # r = 0 value supplies its inner neighbour
            first = data.corner_radii[0] if data.corner_radii else L
            r_inner = first / 50.0
        else:
            r_inner = data.r_min
    breaks = [float(r_inner)] + [rc for rc in data.corner_radii
                                 if r_inner < rc < L] + [float(L)]
    # allocate nodes by logarithmic measure so inner structure and the
    # far field are resolved together
    measures = [np.log(hi / lo) for lo, hi in zip(breaks[:-1], breaks[1:])]
    total = sum(measures)
    nodes = [np.array([breaks[0]])]
    remaining = n_r
    for k, (lo, hi) in enumerate(zip(breaks[:-1], breaks[1:])):
        n_seg = max(8, int(round(n_r * measures[k] / total)))
        if k == len(breaks) - 2:
            n_seg = max(8, remaining)
        remaining -= n_seg
        anchor = data.grading_anchor
        if anchor is not None and anchor >= lo:
            anchor = None
        seg = _segment_nodes(lo, hi, n_seg, anchor)
        nodes.append(seg[1:])
    return AxisymGrid.build(np.concatenate(nodes), n_theta)


# ---------------------------------------------------------------------------
# Chart coefficients sampled on a grid
# ---------------------------------------------------------------------------

@dataclass
class GridCoefficients:
    """Chart and matter data on the grid nodes, side-aware at corners.

    Main arrays hold the minus-side limit at corner nodes;
    ``corner_plus[i]`` holds plus-side values.  ``segments`` are inclusive
    (lo, hi) node-index ranges of the smooth pieces; every radial stencil
    is built inside one segment.  In the areal chart f = 1/lam is kept
    alongside for the boundary-identity checkers.
    """

    data: GluedDataSet
    grid: AxisymGrid
    chart: str
    segments: List[Tuple[int, int]]
    corner_indices: List[int]
    lam: np.ndarray
    lamp: np.ndarray
    sqlam: np.ndarray
    rho: np.ndarray
    rhop: np.ndarray
    a: np.ndarray
    b: np.ndarray
    K: np.ndarray
    mu: np.ndarray
    Jn: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    sqf: np.ndarray
    corner_plus: Dict[int, Dict[str, float]]

    @property
    def volume_density(self):
        """sqrt(lam) rho^2: radial density of dV against ds dx dphi."""
        return self.sqlam * self.rho * self.rho


def _areal_vals(data, rr, patch):
    f = patch.fv(rr)
    fp = patch.fp(rr)
    a = patch.av(rr)
    b = patch.bv(rr)
    bp = patch.bp(rr)
    R = (2.0 / rr**2) * (1.0 - f - rr * fp)
    trk = a + 2 * b
    mu = 0.5 * (R + trk**2 - (a * a + 2 * b * b))
    Jn = np.sqrt(f) * (2.0 * (a - b) / rr - 2.0 * bp)
    return dict(f=f, fp=fp, sqf=np.sqrt(f),
                lam=1.0 / f, lamp=-fp / (f * f), sqlam=1.0 / np.sqrt(f),
                rho=rr, rhop=np.ones_like(rr),
                a=a, b=b, K=trk, mu=mu, Jn=Jn)


def build_coefficients(data: GluedDataSet, grid: AxisymGrid,
                       chart=None) -> GridCoefficients:
    """Sample chart and matter profiles on the grid.

    chart='areal' reads the glued patches; chart='isotropic' uses the
    attached conformally flat chart (vacuum time-symmetric data).  The
    default follows the grid: isotropic when the data has a chart and the
    grid extends inside its minimal sphere.
    """
    s = grid.r
    if chart is None:
        chart = "areal"
        if data.chart is not None and s[0] < data.r_min:
            chart = "isotropic"
    names = ("lam", "lamp", "sqlam", "rho", "rhop", "a", "b", "K",
             "mu", "Jn", "f", "fp", "sqf")

    if chart == "isotropic":
        m = float(data.chart.mass)
        psi = 1.0 + m / (2.0 * s)
        psip = -m / (2.0 * s * s)
        lam = psi**4
        lamp = 4.0 * psi**3 * psip
        rho = s * psi * psi
        rhop = psi * psi + 2.0 * s * psi * psip
        zeros = np.zeros_like(s)
        arrays = dict(lam=lam, lamp=lamp, sqlam=psi * psi, rho=rho,
                      rhop=rhop, a=zeros, b=zeros, K=zeros, mu=zeros,
                      Jn=zeros, f=1.0 / lam, fp=zeros, sqf=1.0 / (psi * psi))
        return GridCoefficients(
            data=data, grid=grid, chart=chart,
            segments=[(0, s.size - 1)], corner_indices=[],
            corner_plus={}, **arrays)

    N = s.size
    corner_idx = []
    for rc in data.corner_radii:
        if s[0] - 1e-9 < rc < s[-1] + 1e-9:
            i = int(np.argmin(np.abs(s - rc)))
            if abs(s[i] - rc) > 1e-9 * max(1.0, rc):
                raise ValueError("grid must place corner radii on nodes")
            corner_idx.append(i)
    bounds = [0] + corner_idx + [N - 1]
    segments = [(bounds[k], bounds[k + 1]) for k in range(len(bounds) - 1)]

    arrays = {name: np.zeros(N) for name in names}
    corner_plus: Dict[int, Dict[str, float]] = {}
    for (lo, hi) in segments:
        patch = data.patch_at(0.5 * (s[lo] + s[hi]))
        vals = _areal_vals(data, s[lo:hi + 1], patch)
        for name in names:
            arrays[name][lo:hi + 1] = vals[name]
    for k, i in enumerate(corner_idx):
        lo, hi = segments[k]
        vm = _areal_vals(data, s[i:i + 1],
                         data.patch_at(0.5 * (s[lo] + s[hi])))
        for name in names:
            arrays[name][i] = vm[name][0]
        lo2, hi2 = segments[k + 1]
        vp = _areal_vals(data, s[i:i + 1],
                         data.patch_at(0.5 * (s[lo2] + s[hi2])))
        corner_plus[i] = {name: float(vp[name][0]) for name in names}

    return GridCoefficients(
        data=data, grid=grid, chart=chart, segments=segments,
        corner_indices=corner_idx, corner_plus=corner_plus, **arrays)


# ---------------------------------------------------------------------------
# Finite-difference machinery
# ---------------------------------------------------------------------------

def _d_r(vals, grid, segments, order, corner_plus_rows=None):
    """Segment-aware radial derivative.

    The main output holds the minus-side (left-segment) limit at corner
    nodes; the plus-side rows go into ``corner_plus_rows`` when a dict is
    supplied and are discarded otherwise.
    """
    r = grid.r
    out = np.zeros_like(vals)
    for (lo, hi) in segments:
        for i in range(lo, hi + 1):
            j0 = lo if i == lo else (hi - 2 if i == hi else i - 1)
            z = r[j0:j0 + 3]
            w = stencil_d1(*z)[i - j0] if order == 1 else stencil_d2(*z)
            row = (w[0] * vals[j0] + w[1] * vals[j0 + 1]
                   + w[2] * vals[j0 + 2])
            if i == lo and lo != 0:
                if corner_plus_rows is not None:
                    corner_plus_rows[i] = row
            else:
                out[i] = row
    return out


def _d_x(vals, grid, order):
    x = grid.x
    M1 = x.size
    out = np.zeros_like(vals)
    for j in range(M1):
        j0 = 0 if j == 0 else (M1 - 3 if j == M1 - 1 else j - 1)
        z = x[j0:j0 + 3]
        w = stencil_d1(*z)[j - j0] if order == 1 else stencil_d2(*z)
        out[:, j] = (w[0] * vals[:, j0] + w[1] * vals[:, j0 + 1]
                     + w[2] * vals[:, j0 + 2])
    return out


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

class AxisymField:
    """Sampled u(s, theta) with gradient and Hessian access.

    ``closures`` optionally carries analytic derivative callables
    (u, u_r, u_x, u_rr, u_rx, u_xx as functions of (r, x)); when present
    they are preferred by the high-accuracy boundary checks.  The delta
    parameter regularizes |grad u| wherever it is divided by.
    """

    def __init__(self, coeffs: GridCoefficients, values, delta=0.0,
                 closures=None, diagnostics=None):
        self.coeffs = coeffs
        self.grid = coeffs.grid
        self.values = np.asarray(values, dtype=float)
        self.delta = float(delta)
        self.closures = closures
        self.diagnostics = dict(diagnostics or {})
        self._cache = {}

    @classmethod
    def from_function(cls, coeffs, fn, delta=0.0, closures=None):
        grid = coeffs.grid
        R, X = np.meshgrid(grid.r, grid.x, indexing="ij")
        return cls(coeffs, fn(R, X), delta=delta, closures=closures)

    # -- finite differences ----------------------------------------------

    def _derivs(self):
        if "u_r" in self._cache:
            return self._cache
        g, segs = self.grid, self.coeffs.segments
        plus_r, plus_rr, plus_rx = {}, {}, {}
        u_r = _d_r(self.values, g, segs, 1, corner_plus_rows=plus_r)
        u_rr = _d_r(self.values, g, segs, 2, corner_plus_rows=plus_rr)
        u_x = _d_x(self.values, g, 1)
        u_xx = _d_x(self.values, g, 2)
        u_rx = _d_r(u_x, g, segs, 1, corner_plus_rows=plus_rx)
        self._cache.update(u_r=u_r, u_rr=u_rr, u_x=u_x, u_xx=u_xx,
                           u_rx=u_rx, plus_r=plus_r, plus_rr=plus_rr,
                           plus_rx=plus_rx)
        return self._cache

    def radial_derivative_rows(self, i, side="minus"):
        """(u_s, u_ss, u_sx) rows at radial index i for the given side."""
        d = self._derivs()
        if side == "plus" and i in d["plus_r"]:
            return d["plus_r"][i], d["plus_rr"][i], d["plus_rx"][i]
        return d["u_r"][i], d["u_rr"][i], d["u_rx"][i]

    def _side_arrays(self, names, side):
        c = self.coeffs
        out = [getattr(c, n).copy() for n in names]
        if side == "plus":
            for i, cp in c.corner_plus.items():
                for k, n in enumerate(names):
                    out[k][i] = cp[n]
        return out

    def gradient(self, side="minus"):
        """(u_t, q): proper radial derivative u_s/sqrt(lam) and u_theta/rho."""
        d = self._derivs()
        g = self.grid
        sin = np.sqrt(np.maximum(1.0 - g.x**2, 0.0))[None, :]
        u_r = d["u_r"].copy()
        if side == "plus":
            for i, row in d["plus_r"].items():
                u_r[i] = row
        (sqlam, rho) = self._side_arrays(("sqlam", "rho"), side)
        u_t = u_r / sqlam[:, None]
        q = -sin * d["u_x"] / rho[:, None]
        return u_t, q

    def grad_norm(self, side="minus", delta=None):
        u_t, q = self.gradient(side)
        delta = self.delta if delta is None else delta
        return np.sqrt(u_t * u_t + q * q + delta * delta)

    def grad_norm_plain(self, side="minus"):
        return self.grad_norm(side, delta=0.0)

    def laplacian(self, side="minus"):
        """Delta u from the same stencils used everywhere else."""
        d = self._derivs()
        g = self.grid
        x = g.x[None, :]
        u_r, u_rr = d["u_r"].copy(), d["u_rr"].copy()
        if side == "plus":
            for i, row in d["plus_r"].items():
                u_r[i] = row
                u_rr[i] = d["plus_rr"][i]
        lam, lamp, rho, rhop = [arr[:, None] for arr in self._side_arrays(
            ("lam", "lamp", "rho", "rhop"), side)]
        ang = ((1.0 - x * x) * d["u_xx"] - 2.0 * x * d["u_x"]) / (rho * rho)
        return (u_rr / lam
                + (2.0 * rhop / (lam * rho) - lamp / (2.0 * lam * lam)) * u_r
                + ang)

    # -- export -----------------------------------------------------------

    def to_csv(self, path):
        """CSV export (r, theta, u, |grad u|), one row per node; r is the
        areal radius of the node."""
        gn = self.grad_norm_plain()
        rho = self.coeffs.rho
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["r", "theta", "u", "grad_norm"])
            for i in range(self.grid.n_r):
                for j, th in enumerate(self.grid.theta):
                    wr.writerow([repr(float(rho[i])), repr(float(th)),
                                 repr(float(self.values[i, j])),
                                 repr(float(gn[i, j]))])


@dataclass
class SpacetimeHessianField:
    """Orthonormal components of the spacetime Hessian and its square.

    ``pure`` holds the covariant Hessian of u alone; ``full`` adds
    |grad u| k.  Components are (rr, tt, pp, rt).
    """

    pure: Dict[str, np.ndarray]
    full: Dict[str, np.ndarray]
    grad_norm: np.ndarray
    norm_sq: np.ndarray
    corner_plus_norm_sq: Dict[int, np.ndarray]


def _hessian_components(field: AxisymField, side="minus"):
    g = field.grid
    d = field._derivs()
    x = g.x[None, :]
    sin = np.sqrt(np.maximum(1.0 - g.x**2, 0.0))[None, :]
    u_r, u_rr, u_rx = d["u_r"].copy(), d["u_rr"].copy(), d["u_rx"].copy()
    if side == "plus":
        for i in d["plus_r"]:
            u_r[i] = d["plus_r"][i]
            u_rr[i] = d["plus_rr"][i]
            u_rx[i] = d["plus_rx"][i]
    lam, lamp, sqlam, rho, rhop = [arr[:, None] for arr in
                                   field._side_arrays(
                                       ("lam", "lamp", "sqlam", "rho",
                                        "rhop"), side)]
    t_rr = (u_rr - (lamp / (2.0 * lam)) * u_r) / lam
    t_rt = -(sin / (sqlam * rho)) * (u_rx - (rhop / rho) * d["u_x"])
    t_tt = ((1.0 - x * x) * d["u_xx"] - x * d["u_x"]) / (rho * rho) \
        + (rhop / (lam * rho)) * u_r
    t_pp = (rhop / (lam * rho)) * u_r - x * d["u_x"] / (rho * rho)
    return dict(rr=t_rr, rt=t_rt, tt=t_tt, pp=t_pp)


def spacetime_hessian(field: AxisymField,
                      data: GluedDataSet = None) -> SpacetimeHessianField:
    """Covariant Hessian plus |grad u| k, contracted square included.

    The construction identity full - pure = |grad u| k holds node-wise by
    definition; |grad u| here is the plain (unregularized) norm so the
    identity is exact.
    """
    c = field.coeffs
    pure = _hessian_components(field, "minus")
    gn = field.grad_norm_plain("minus")
    a, b = c.a[:, None], c.b[:, None]
    full = dict(rr=pure["rr"] + gn * a, tt=pure["tt"] + gn * b,
                pp=pure["pp"] + gn * b, rt=pure["rt"].copy())

    def square(comp):
        return (comp["rr"] ** 2 + comp["tt"] ** 2 + comp["pp"] ** 2
                + 2.0 * comp["rt"] ** 2)

    norm_sq = square(full)
    corner_sq = {}
    if c.corner_indices:
        pure_p = _hessian_components(field, "plus")
        gn_p = field.grad_norm_plain("plus")
        for i in c.corner_indices:
            cp = c.corner_plus[i]
            row = dict(rr=pure_p["rr"][i] + gn_p[i] * cp["a"],
                       tt=pure_p["tt"][i] + gn_p[i] * cp["b"],
                       pp=pure_p["pp"][i] + gn_p[i] * cp["b"],
                       rt=pure_p["rt"][i])
            corner_sq[i] = (row["rr"] ** 2 + row["tt"] ** 2 + row["pp"] ** 2
                            + 2.0 * row["rt"] ** 2)
    return SpacetimeHessianField(pure=pure, full=full, grad_norm=gn,
                                 norm_sq=norm_sq,
                                 corner_plus_norm_sq=corner_sq)
