"""Gallery of analytic fields with known limit behaviour.

Every item is built from a stream function sampled on the grid; velocity
and vorticity are obtained spectrally, so velocities are divergence-free
to round-off.  Each item carries ``facts``: analytic expectations paired
with the values measured on the grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.fft import next_fast_len
from scipy.special import j0

from .diagnostics import atom_mass
from .dynamics import ForceSpec, evolve, steady_residual
from .spectral import (
    ScalarField,
    TorusGrid,
    VectorField,
    curl,
    h1_seminorm,
    l1,
    l2,
    laplacian,
    perp_grad,
    write_snapshot,
)

__all__ = [
    "GalleryItem",
    "Fact",
    "REGISTRY",
    "list_items",
    "build",
    "emit",
    "concentrating_vortex",
    "w11_failure_family",
    "checkerboard",
    "steady_shear",
    "oscillating_stream",
    "radial_patch",
    "heat_self_similar",
    "heat_dissipation_integral",
    "heat_dissipation_reference",
]

CENTER = (np.pi, np.pi)
BLOCK_POWER = 8  # stream block (1 - rho^2)^k
PIECE_POWER = 4  # flatter block for the concentrating pieces (|w| sampled more evenly)
PIECE_CELLS = 24  # grid cells per piece radius


@dataclass
class Fact:
    """An analytic expectation and the value measured on the grid."""

    expected: float
    measured: float
    tol: float
    relation: str = "eq"  # "eq": |m - e| <= tol*max(1,|e|); "le": m <= e + tol; "ge"; "true"
    note: str = ""
    known_gap: bool = False  # declared but not attainable by this construction

    @property
    def passed(self) -> bool:
        e, m, t = self.expected, self.measured, self.tol
        if self.relation == "eq":
            return abs(m - e) <= t * max(1.0, abs(e))
        if self.relation == "rel":
            return abs(m - e) <= t * abs(e)
        if self.relation == "le":
            return m <= e + t
        if self.relation == "ge":
            return m >= e - t
        if self.relation == "true":
            return bool(m)
        raise ValueError(self.relation)

    def record(self) -> dict:
        return {"expected": _jsonable(self.expected), "measured": _jsonable(self.measured),
                "tol": self.tol, "relation": self.relation, "pass": bool(self.passed), "note": self.note,
                "known_gap": self.known_gap}


def _jsonable(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    return float(x)


@dataclass
class GalleryItem:
    name: str
    params: dict
    grid: TorusGrid
    omega: ScalarField
    velocity: VectorField
    nu: float | None = None
    force: VectorField | None = None
    facts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        """All facts pass, apart from those flagged as known gaps."""
        return all(f.passed for f in self.facts.values() if not f.known_gap)

    def facts_json(self) -> str:
        return json.dumps(
            {"name": self.name, "params": {k: _param(v) for k, v in self.params.items()},
             "grid_n": self.grid.n, "nu": self.nu,
             "facts": {k: f.record() for k, f in self.facts.items()}},
            indent=2, sort_keys=True,
        )


def _param(v):
    return v if isinstance(v, (int, float, str, bool)) or v is None else str(v)


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


def _pow2_at_least(x: float, floor: int = 64) -> int:
    n = floor
    while n < x:
        n *= 2
    return n


def _fast_even(x: float, floor: int = 64) -> int:
    """Smallest even FFT-friendly size >= ``x``."""
    n = next_fast_len(max(int(math.ceil(x)), floor), real=True)
    while n % 2:
        n = next_fast_len(n + 1, real=True)
    return n


def _periodic_radius(grid: TorusGrid, center) -> np.ndarray:
    x1, x2 = grid.mesh()
    d1 = np.abs(x1 - center[0])
    d2 = np.abs(x2 - center[1])
    d1 = np.minimum(d1, 2 * np.pi - d1)
    d2 = np.minimum(d2, 2 * np.pi - d2)
    return np.hypot(d1, d2)


def block_psi(rho, k: int = BLOCK_POWER):
    """Radial stream block ``(1 - rho^2)^k`` on the unit disk."""
    rho = np.asarray(rho, dtype=float)
    return np.where(rho < 1.0, np.clip(1.0 - rho**2, 0.0, None) ** k, 0.0)


def block_dpsi(rho, k: int = BLOCK_POWER):
    """``d/drho`` of the block (the azimuthal velocity)."""
    rho = np.asarray(rho, dtype=float)
    return np.where(rho < 1.0, -2.0 * k * rho * np.clip(1.0 - rho**2, 0.0, None) ** (k - 1), 0.0)


def block_omega(rho, k: int = BLOCK_POWER):
    """Laplacian of the block: ``4k (1-rho^2)^(k-2) (k rho^2 - 1)``."""
    rho = np.asarray(rho, dtype=float)
    return np.where(rho < 1.0, 4.0 * k * np.clip(1.0 - rho**2, 0.0, None) ** (k - 2) * (k * rho**2 - 1.0), 0.0)


def _radial_norms(dpsi: Callable, lap: Callable, breaks=(), R: float = 1.0) -> tuple[float, float, float]:
    """``||grad psi||_2^2``, ``||Laplace psi||_1`` and ``||grad psi||_1`` of a radial stream function."""
    pts = sorted(b for b in breaks if 0 < b < R)
    opts = dict(limit=400, epsabs=0.0, epsrel=1e-12, points=pts or None)
    e = integrate.quad(lambda r: dpsi(r) ** 2 * 2 * np.pi * r, 0, R, **opts)[0]
    w1 = integrate.quad(lambda r: abs(lap(r)) * 2 * np.pi * r, 0, R, **opts)[0]
    u1 = integrate.quad(lambda r: abs(dpsi(r)) * 2 * np.pi * r, 0, R, **opts)[0]
    return e, w1, u1


def _fields_from_psi(grid: TorusGrid, psi: np.ndarray) -> tuple[VectorField, ScalarField]:
    ps = ScalarField(grid, psi)
    u = perp_grad(ps)
    w = curl(u)
    w = ScalarField(grid, w.values - w.mean(), mean_zero=True)
    return u, w


def _div_fact(u: VectorField) -> Fact:
    div = float(np.max(np.abs(u.divergence().values)))
    scale = max(float(np.max(np.abs(u.values))), 1e-300)
    return Fact(0.0, div / scale, 1e-10, "le", "max|div u| / max|u|")


# ---------------------------------------------------------------------------
# Items
# ---------------------------------------------------------------------------


def _lattice(count: int):
    K = math.ceil(math.sqrt(count))
    d = 1.4 / K
    pts = [(-0.7 + d * (i + 0.5), -0.7 + d * (j + 0.5)) for i in range(K) for j in range(K)]
    return pts[:count], 0.45 * d


def concentrating_vortex(n: int, grid_n: int | None = None, eps: float | None = None) -> GalleryItem:
    """``u_n`` with ``||w_n||_1 = 1``, support in ``B_{eps}`` and ``||u_n||_2`` decreasing.

    ``v_n`` is a sum of ``n`` disjoint stream blocks of equal size with
    weights ``1/j`` (so ``||v||_2^2 ~ sum 1/j^2`` stays bounded while
    ``||curl v||_1 ~ sum 1/j`` diverges), normalized to unit vorticity
    mass and concentrated as ``u_n(x) = eps^{-1} v_n((x - c)/eps)`` with
    ``eps = 1/n`` by default.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    eps = 1.0 / n if eps is None else float(eps)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    centers, s = _lattice(n)
    if grid_n is None:
        grid_n = _fast_even(2 * np.pi * PIECE_CELLS / (eps * s))
    grid = TorusGrid(grid_n)
    if eps * s < 8 * grid.spacing:
        raise ValueError(f"support under grid resolution: piece radius {eps * s:.3g} < 8 cells")
    k = PIECE_POWER
    e_blk, w1_blk, u1_blk = _radial_norms(lambda r: block_dpsi(r, k), lambda r: block_omega(r, k),
                                          breaks=(1 / math.sqrt(k),))
    weights = np.array([1.0 / (j + 1) for j in range(n)])
    Z = float(np.sum(weights)) * w1_blk
    psi = np.zeros((grid.n, grid.n))
    for wj, (c1, c2) in zip(weights, centers):
        rho = _periodic_radius(grid, (CENTER[0] + eps * c1, CENTER[1] + eps * c2)) / (eps * s)
        psi += (wj / Z) * block_psi(rho, k)
    u, w = _fields_from_psi(grid, psi)
    u_l2_exact = math.sqrt(float(np.sum(weights**2)) * e_blk) / Z
    u_l1_exact = float(np.sum(weights)) * u1_blk * eps * s / Z
    facts = {
        "omega_l1": Fact(1.0, l1(w), 1e-3, "eq", "||w_n||_1 = 1"),
        "u_l2": Fact(u_l2_exact, l2(u), 1e-3, "rel", "||u_n||_2 closed form (independent of eps)"),
        "u_l1": Fact(u_l1_exact, l1(u), 1e-3, "rel", "||u_n||_1 closed form (proportional to eps)"),
        "divergence_free": _div_fact(u),
        "atom_2eps": Fact(0.99, atom_mass(abs(w), CENTER, [2 * eps]).score, 0.0, "ge",
                          "|w_n|(B_{2 eps}) >= 0.99"),
    }
    return GalleryItem("concentrating_vortex", {"n": n, "eps": eps}, grid, w, u, None, None, facts,
                       {"eps": eps, "u_l2_exact": u_l2_exact, "u_l1_exact": u_l1_exact})


# mollified log potential -------------------------------------------------

_CORE_Q = 4  # core density ((q+1)/(pi a^2)) (1 - r^2/a^2)^q


def _log_potential(r, a):
    """Potential of the unit polynomial core of radius ``a`` (``Laplace phi = rho_a``)."""
    r = np.asarray(r, dtype=float)
    q1 = _CORE_Q + 1
    out = np.empty_like(r)
    outside = r >= a
    with np.errstate(divide="ignore"):
        out[outside] = np.log(r[outside]) / (2 * np.pi)
    t = (r[~outside] / a) ** 2
    corr = sum(comb(q1, m) * (-1) ** (m + 1) * (1.0 - t**m) / (2 * m) for m in range(1, q1 + 1))
    out[~outside] = (math.log(a) - corr) / (2 * np.pi)
    return out


def _log_potential_d(r, a):
    r = np.asarray(r, dtype=float)
    q1 = _CORE_Q + 1
    t = np.clip(1.0 - (r / a) ** 2, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(r > 0, (1.0 - t**q1) / (2 * np.pi * r), 0.0)
    return out


def _core_density(r, a):
    r = np.asarray(r, dtype=float)
    return np.where(r < a, (_CORE_Q + 1) / (np.pi * a * a) * np.clip(1.0 - (r / a) ** 2, 0, None) ** _CORE_Q, 0.0)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**4 * (35 - 84 * t + 70 * t**2 - 20 * t**3)


def _smoothstep_d(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 140 * t**3 * (1 - t) ** 3, 0.0)


def _smoothstep_dd(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 420 * t**2 * (1 - t) ** 2 * (1 - 2 * t), 0.0)


def _chi(r):
    return 1.0 - _smoothstep((np.asarray(r, float) - 0.5) / 0.5)


def _chi_d(r):
    return -2.0 * _smoothstep_d((np.asarray(r, float) - 0.5) / 0.5)


def _chi_dd(r):
    return -4.0 * _smoothstep_dd((np.asarray(r, float) - 0.5) / 0.5)


class _CutLogPotential:
    """``psi = chi(r) phi_a(r)``: cut-off, mollified logarithmic potential on ``B_1``."""

    def __init__(self, a: float):
        if not 0 < a < 0.5:
            raise ValueError("core radius must lie in (0, 1/2)")
        self.a = a

    def psi(self, r):
        return _chi(r) * _log_potential(np.maximum(r, 0.0), self.a)

    def dpsi(self, r):
        r = np.asarray(r, dtype=float)
        return _chi_d(r) * _log_potential(np.maximum(r, 1e-300), self.a) + _chi(r) * _log_potential_d(r, self.a)

    def lap(self, r):
        r = np.asarray(r, dtype=float)
        rr = np.maximum(r, 1e-300)
        lap_chi = _chi_dd(r) + _chi_d(r) / rr
        return (_chi(r) * _core_density(r, self.a) + 2 * _chi_d(r) * _log_potential_d(r, self.a)
                + _log_potential(rr, self.a) * lap_chi)

    def norms(self):
        return _radial_norms(self.dpsi, self.lap, breaks=(self.a, 0.5))


def w11_failure_family(n: int, grid_n: int | None = None) -> GalleryItem:
    """``v_n = grad_perp psi_n / ||grad psi_n||_2`` with ``psi_n`` a cut-off log potential.

    The core radius is ``1/n``; ``||grad psi_n||_2^2 = log(n)/(2 pi) + const``
    so ``||v_n||_1 + ||curl v_n||_1 -> 0`` while ``||v_n||_2 = 1``.  The
    field lives on ``B_1`` around ``(pi, pi)`` (no further rescaling).
    """
    if n < 4:
        raise ValueError("n must be >= 4")
    a = 1.0 / n
    pot = _CutLogPotential(a)
    e, w1, u1 = pot.norms()
    if grid_n is None:
        grid_n = _pow2_at_least(8 * np.pi * n, floor=256)
    grid = TorusGrid(grid_n)
    if a < 3 * grid.spacing:
        raise ValueError(f"under-resolution: core radius {a:.3g} < 3 cells")
    r = _periodic_radius(grid, CENTER)
    psi = np.where(r < 1.0, pot.psi(r), 0.0) / math.sqrt(e)
    u, w = _fields_from_psi(grid, psi)
    e4 = _CutLogPotential(0.25).norms()[0]
    facts = {
        "u_l2": Fact(1.0, l2(u), 1e-3, "eq", "||u_n||_2 = 1"),
        "omega_l1": Fact(w1 / math.sqrt(e), l1(w), 1e-2, "rel", "||w_n||_1 closed form"),
        "u_l1": Fact(u1 / math.sqrt(e), l1(u), 1e-2, "rel", "||u_n||_1 closed form"),
        "grad_psi_log_growth": Fact(e4 + math.log(n / 4) / (2 * np.pi), e * l2(u) ** 2, 1e-3, "rel",
                                    "||grad psi_n||^2 = ||grad psi_4||^2 + log(n/4)/(2 pi)"),
        "divergence_free": _div_fact(u),
        "atom_u_sq": Fact(0.5, atom_mass(u.magnitude_sq(), CENTER, [0.5]).score, 0.0, "ge",
                          "|u_n|^2(B_{1/2}) >= 1/2"),
    }
    return GalleryItem("w11_failure_family", {"n": n}, grid, w, u, None, None, facts,
                       {"grad_psi_sq": e, "omega_l1": w1 / math.sqrt(e), "u_l1": u1 / math.sqrt(e),
                        "core_radius": a})


def checkerboard(n: int, grid_n: int | None = None, core: int | None = None) -> GalleryItem:
    """``n x n`` tiles ``u_n = sum_i v((x - x_i)/eps)`` with ``eps = pi/n``.

    ``v`` is the unit-energy cut-off log-potential field with core index
    ``core`` (default ``2 + n // 8``), so each tile carries energy
    ``eps^2`` and ``|u_n|^2`` has total mass ``pi^2 = (2 pi)^2 / 4``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    core = core if core is not None else 2 + n // 8
    eps = np.pi / n
    pot = _CutLogPotential(1.0 / core)
    e, w1, u1 = pot.norms()
    if grid_n is None:
        grid_n = max(256, 64 * n)
    if grid_n % n:
        raise ValueError("grid size must be a multiple of the tile count")
    grid = TorusGrid(grid_n)
    x1, x2 = grid.mesh()
    # local coordinates inside each tile (tile centres at (i + 1/2) * 2 eps)
    y1 = (np.mod(x1, 2 * eps) - eps) / eps
    y2 = (np.mod(x2, 2 * eps) - eps) / eps
    rho = np.hypot(y1, y2)
    # v(y) = grad_perp psi(y) / sqrt(e); v((x-x_i)/eps) = grad_perp [eps psi((x-x_i)/eps)] / sqrt(e)
    psi = np.where(rho < 1.0, pot.psi(rho), 0.0) * eps / math.sqrt(e)
    u, w = _fields_from_psi(grid, psi)
    mag = u.magnitude_sq()
    pair_one = grid.integrate(mag.values) / grid.area
    pair_cos = grid.integrate(mag.values * np.cos(x1)) / grid.area
    facts = {
        "energy_density": Fact(0.25, pair_one, 0.05, "eq", "<|u_n|^2, 1> / (2 pi)^2 -> 1/4"),
        "cos_pairing": Fact(0.0, pair_cos, 0.05, "eq", "<|u_n|^2, cos x1> / (2 pi)^2 -> 0"),
        "omega_l1": Fact(1.0, l1(w), 1e-3, "eq", "||w_n||_1 = 1 (incompatible with unit-energy tiles)",
                         known_gap=True),
        "omega_l1_closed_form": Fact(n * n * eps * w1 / math.sqrt(e), l1(w), 2e-2, "rel",
                                     "||w_n||_1 = n^2 eps ||curl v||_1"),
        "u_l1": Fact(n * n * eps * eps * u1 / math.sqrt(e), l1(u), 2e-2, "rel",
                     "||u_n||_1 = n^2 eps^2 ||v||_1"),
        "tiles_disjoint": Fact(1.0, bool(np.all(rho[psi != 0] < 1.0)), 0.0, "true",
                               "tile supports inside their cells"),
        "divergence_free": _div_fact(u),
    }
    return GalleryItem("checkerboard", {"n": n, "core": core}, grid, w, u, None, None, facts,
                       {"eps": eps, "pair_one": pair_one, "pair_cos": pair_cos,
                        "u_l1_closed": n * n * eps * eps * u1 / math.sqrt(e),
                        "omega_l1_closed": n * n * eps * w1 / math.sqrt(e)})


def steady_shear(m: int, grid_n: int | None = None) -> GalleryItem:
    """Steady forced shear ``u = f = (sin(m x2), 0)`` with ``nu = 1/m^2``."""
    if m < 1 or int(m) != m:
        raise ValueError("m must be a positive integer")
    m = int(m)
    nu = 1.0 / m**2
    grid = TorusGrid(grid_n or _pow2_at_least(8 * m, floor=32))
    x1, x2 = grid.mesh()
    psi = np.cos(m * x2) / m
    u, w = _fields_from_psi(grid, psi)
    f = VectorField(grid, u.values.copy())
    diss_density = nu * (_grad_sq_density(u))
    facts = {
        "dissipation": Fact(2 * np.pi**2, nu * h1_seminorm(u) ** 2, 1e-8, "eq", "nu ||grad u||^2 = 2 pi^2"),
        "steady_residual": Fact(0.0, steady_residual(u, f, nu), 1e-10, "le", "steady NS residual"),
        "dissipation_cos_pairing": Fact(0.0, grid.integrate(diss_density * np.cos(x1)), 1e-10, "eq",
                                        "<nu |grad u|^2, cos x1> = 0"),
        "divergence_free": _div_fact(u),
    }
    return GalleryItem("steady_shear", {"m": m}, grid, w, u, nu, f, facts)


def _grad_sq_density(u: VectorField) -> np.ndarray:
    g = u.grid
    k1, k2 = g.deriv_wavevectors
    s = u.spectrum
    parts = [g.ifft(1j * k * s[c]) for c in (0, 1) for k in (k1, k2)]
    return sum(p**2 for p in parts)


def oscillating_stream(kappa: float, m: int, grid_n: int | None = None) -> GalleryItem:
    """``psi = m^{-1} sin(m x1) cos(m x2)`` with ``nu = m^{1/kappa}``, ``f = -nu Laplace u``."""
    if not -0.5 < kappa < 0:
        raise ValueError("kappa must lie in (-1/2, 0)")
    if m < 1 or int(m) != m:
        raise ValueError("m must be a positive integer")
    m = int(m)
    nu = float(m) ** (1.0 / kappa)
    grid = TorusGrid(grid_n or _pow2_at_least(8 * m, floor=32))
    x1, x2 = grid.mesh()
    psi = np.sin(m * x1) * np.cos(m * x2) / m
    u, w = _fields_from_psi(grid, psi)
    f = -nu * laplacian(u)
    facts = {
        "omega_eigen": Fact(0.0, float(np.max(np.abs(w.values + 2 * m * m * psi))), 1e-9, "le",
                            "w = -2 m^2 psi"),
        "u_l2": Fact(math.sqrt(2) * np.pi, l2(u), 1e-10, "eq", "||u||_2 = sqrt(2) pi"),
        "force_l2": Fact(2 * nu * m * m * l2(u), l2(f), 1e-10, "rel", "||f|| = 2 nu m^2 ||u||"),
        "force_scaling": Fact(2 * nu ** (1 + 2 * kappa) * math.sqrt(2) * np.pi, l2(f), 1e-8, "rel",
                              "||f|| = 2 nu^{1+2 kappa} ||u||"),
        "steady_residual": Fact(0.0, steady_residual(u, f, nu), 1e-8, "le", "steady NS residual"),
        "divergence_free": _div_fact(u),
    }
    return GalleryItem("oscillating_stream", {"kappa": kappa, "m": m}, grid, w, u, nu, f, facts)


def radial_patch(scale: float, grid_n: int | None = None) -> GalleryItem:
    """Radial compact patch ``u(x) = s^{-1} U((x - c)/s)`` with ``nu = s^2``.

    The base vorticity is ``-Laplace`` of the stream block: a positive core
    and a negative ring with zero net circulation, so ``u`` vanishes
    outside the support.  Radial symmetry makes it a steady Euler flow;
    with ``f = -nu Laplace u`` it is a steady forced Navier-Stokes flow.
    """
    s = float(scale)
    if not 0 < s <= 1:
        raise ValueError("scale must lie in (0, 1]")
    nu = s * s
    if grid_n is None:
        grid_n = _fast_even(2 * np.pi * 48 / s, floor=128)
    grid = TorusGrid(grid_n)
    r = _periodic_radius(grid, CENTER)
    psi = -block_psi(r / s)
    u, w = _fields_from_psi(grid, psi)
    f = -nu * laplacian(u)
    # velocity from the closed-form vorticity by radial quadrature
    radii = np.linspace(0.1, 1.9, 10)
    ut_quad = np.array([_utheta_quad(rr) for rr in radii])
    ut_exact = -block_dpsi(radii)
    # u . grad w on the grid
    g = grid
    k1, k2 = g.deriv_wavevectors
    ws = w.spectrum
    wx, wy = g.ifft(1j * k1 * ws), g.ifft(1j * k2 * ws)
    transport = float(np.max(np.abs(u.u1 * wx + u.u2 * wy)))
    transport_scale = float(np.max(np.abs(u.values))) * max(float(np.max(np.abs(wx))), float(np.max(np.abs(wy))))
    grad_sq = _grad_sq_density(u)
    atoms = {
        "u_sq": atom_mass(u.magnitude_sq(), CENTER, [2 * s]).score,
        "abs_omega": atom_mass(abs(w), CENTER, [2 * s]).score,
        "nu_grad_sq": atom_mass(ScalarField(g, nu * grad_sq), CENTER, [2 * s]).score,
        "f_sq": atom_mass(f.magnitude_sq(), CENTER, [2 * s]).score,
    }
    facts = {
        "utheta_quadrature": Fact(0.0, float(np.max(np.abs(ut_quad - ut_exact))), 1e-10, "le",
                                  "u_theta(r) = r^{-1} int_0^r s w(s) ds"),
        "compact_support": Fact(0.0, float(np.max(np.abs(ut_quad[radii > 1.0]))), 1e-10, "le",
                                "u_theta = 0 beyond the support"),
        "transport": Fact(0.0, transport / transport_scale, 1e-8, "le", "max|u . grad w| (relative)"),
        "nu_dissipation_invariant": Fact(_grad_u_sq_base(), nu * g.integrate(grad_sq), 1e-6, "rel",
                                         "nu ||grad u^nu||^2 independent of nu"),
        "atoms_positive": Fact(1.0, bool(min(atoms.values()) > 0), 0.0, "true", "atom scores at origin > 0"),
        "divergence_free": _div_fact(u),
    }
    return GalleryItem("radial_patch", {"scale": s}, grid, w, u, nu, f, facts, {"atoms": atoms})


def _utheta_quad(r: float) -> float:
    # base vorticity of the patch is -block_omega
    val = integrate.quad(lambda q: -q * block_omega(q), 0.0, min(r, 1.0), limit=200, epsabs=1e-13,
                         epsrel=0.0, points=[1 / math.sqrt(BLOCK_POWER)] if r > 0.36 else None)[0]
    return val / r


def _grad_u_sq_base() -> float:
    """``||grad U||^2 = ||w||^2`` of the unit patch (radial quadrature)."""
    return integrate.quad(lambda q: block_omega(q) ** 2 * 2 * np.pi * q, 0, 1, limit=200, epsrel=1e-13)[0]


# heat self-similarity ------------------------------------------------------


def heat_dissipation_integral(omega0: ScalarField, nu: float, t1: float) -> float:
    """``nu int_0^t1 ||exp(nu t Laplace) w0||^2 dt`` in closed form (spectral)."""
    g = omega0.grid
    lam = g.lap_symbol
    a = np.abs(omega0.spectrum) ** 2 * g.area / g.n**4
    with np.errstate(divide="ignore", invalid="ignore"):
        per_mode = np.where(lam > 0, (1.0 - np.exp(-2.0 * nu * lam * t1)) / (2.0 * lam), nu * t1)
    per_mode = np.where(lam > 0, per_mode, 0.0)
    return float(np.sum(a * per_mode))


def heat_dissipation_reference(k: int = BLOCK_POWER) -> float:
    """``int_0^1 ||w(tau)||^2 dtau`` on the plane for the heat flow of the base profile (Hankel transform)."""

    def hankel(kappa):
        return 2 * np.pi * integrate.quad(lambda r: block_omega(r, k) * j0(kappa * r) * r, 0, 1,
                                          limit=400, epsrel=1e-12)[0]

    def integrand(kappa):
        if kappa == 0:
            return 0.0
        return hankel(kappa) ** 2 * (1 - np.exp(-2 * kappa**2)) / (2 * kappa**2) * kappa / (2 * np.pi)

    return integrate.quad(integrand, 0, 60, limit=400, epsrel=1e-10)[0]


def _heat_profile(grid: TorusGrid, nu: float) -> tuple[VectorField, ScalarField]:
    r = _periodic_radius(grid, CENTER)
    return _fields_from_psi(grid, block_psi(r / nu))  # Laplace psi = nu^{-2} w0(x/nu)


def heat_self_similar(nu: float, grid_n: int | None = None, check_evolve: bool = False,
                      evolve_grid_n: int = 256) -> GalleryItem:
    """Initial vorticity ``nu^{-2} w0(x/nu)`` of the self-similar heat family.

    Under pure diffusion ``w^nu(x, t) = nu^{-2} w(x/nu, t/nu)``, hence
    ``nu int_0^nu ||w^nu||^2 dt = int_0^1 ||w||^2 dtau`` for every ``nu``.
    The default grid keeps ``n * nu`` fixed so the profile is sampled
    identically at every ``nu``.  With ``check_evolve`` the solver is run
    to ``t = nu`` on an ``evolve_grid_n`` grid and compared with the
    spectral heat flow (advection vanishes by radial symmetry).
    """
    nu = float(nu)
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")
    if grid_n is None:
        grid_n = _pow2_at_least(2 * np.pi * 16 / nu)
    grid = TorusGrid(grid_n)
    if nu < 8 * grid.spacing:
        raise ValueError(f"support scale {nu:.3g} under grid resolution (< 8 cells)")
    u, w = _heat_profile(grid, nu)
    diss = heat_dissipation_integral(w, nu, nu)
    ref = heat_dissipation_reference()
    facts = {
        "dissipation_identity": Fact(ref, diss, 1e-3, "rel", "nu int_0^nu ||w^nu||^2 = int_0^1 ||w||^2"),
        "divergence_free": _div_fact(u),
    }
    extra = {"dissipation": diss, "reference": ref}
    if check_evolve:
        g = TorusGrid(evolve_grid_n)
        ue, we = _heat_profile(g, nu)
        dt = 0.4 * g.spacing / float(np.max(np.abs(ue.values)))
        steps = math.ceil(nu / dt)
        traj = evolve(we, nu, nu, nu / steps, snap_every=steps)
        exact = g.ifft(we.spectrum * np.exp(-nu * g.lap_symbol * nu))
        err = l2(ScalarField(g, traj.snapshots[-1].values - exact)) / l2(ScalarField(g, exact))
        facts["evolve_matches_heat"] = Fact(0.0, err, 1e-6, "le", "advection vanishes: evolve = heat flow")
        facts["l1_nonincreasing"] = Fact(l1(we), l1(traj.snapshots[-1]), 1e-12 * l1(we), "le",
                                         "||w(t)||_1 <= ||w0||_1")
        extra["trajectory"] = traj
    return GalleryItem("heat_self_similar", {"nu": nu}, grid, w, u, nu, None, facts, extra)


# ---------------------------------------------------------------------------
# Registry and emission
# ---------------------------------------------------------------------------

REGISTRY: dict[str, tuple[Callable, dict]] = {
    "concentrating_vortex": (concentrating_vortex, {"n": int}),
    "w11_failure_family": (w11_failure_family, {"n": int}),
    "checkerboard": (checkerboard, {"n": int}),
    "steady_shear": (steady_shear, {"m": int}),
    "oscillating_stream": (oscillating_stream, {"kappa": float, "m": int}),
    "radial_patch": (radial_patch, {"scale": float}),
    "heat_self_similar": (heat_self_similar, {"nu": float}),
}


def list_items() -> list[str]:
    return sorted(REGISTRY)


def build(name: str, **params) -> GalleryItem:
    """Construct a gallery item by name (``grid_n`` may be passed through)."""
    if name not in REGISTRY:
        raise KeyError(f"unknown gallery item {name!r}; available: {', '.join(list_items())}")
    fn, schema = REGISTRY[name]
    kwargs = {}
    for key, val in params.items():
        if key == "grid_n":
            kwargs[key] = int(val)
        elif key in schema:
            kwargs[key] = schema[key](val)
        else:
            raise ValueError(f"unknown parameter {key!r} for {name}")
    missing = [k for k in schema if k not in kwargs]
    if missing:
        raise ValueError(f"missing parameters for {name}: {', '.join(missing)}")
    return fn(**kwargs)


def emit(name: str, params: dict, outdir) -> tuple[Path, Path]:
    """Write ``<name>.vll`` (vorticity snapshot) and ``<name>.facts.json``."""
    item = build(name, **params)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    snap = write_snapshot(outdir / f"{name}.vll", item.omega, item.nu or 0.0, 0.0)
    facts = outdir / f"{name}.facts.json"
    facts.write_text(item.facts_json() + "\n")
    return snap, facts
