"""Diagnostics of inviscid-limit behaviour along viscous trajectories.

Time integrals are trapezoid sums over the snapshot times, with linear
interpolation of the integrand at the window endpoints.  Ball functionals
use :func:`vll.spectral.ball_convolve` and take the supremum over grid
nodes.  Certificates compare a measured left-hand side with a right-hand
side; constant-free ones allow a small relative slack, constant-bearing
ones fit the constant on the largest viscosity and allow a ``2x`` drift.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dynamics import Trajectory, monotonicity_checks
from .equi import BetaFunction, InverseTables, build_inverses
from .spectral import (
    ScalarField,
    VectorField,
    ball_convolve,
    disk_area,
    disk_average_symbol,
    l2,
    mollify,
    resample,
)

__all__ = [
    "SparseSnapshotWarning",
    "Certificate",
    "DriftResult",
    "RateResult",
    "KolmogorovReport",
    "PairingRecord",
    "AtomRecord",
    "DiagnosticTable",
    "time_integral",
    "dissipation_total",
    "grad_u_integral",
    "structure_function",
    "lambda_con",
    "omega_con",
    "q_con",
    "omega_hat_field",
    "modulus_of_compactness",
    "short_time_certificate",
    "higher_order_certificate",
    "s2_certificate",
    "monotonicity_certificates",
    "kolmogorov_equivalence_report",
    "fit_drift",
    "rate_certificate",
    "weak_star_pairing",
    "tensor_pairing",
    "atom_mass",
]

MIN_SNAPSHOTS = 50
DRIFT_BUDGET = 2.0
EPS_SCAN = (1e-2, 1e-1, 1.0)


class SparseSnapshotWarning(UserWarning):
    """A time window holds fewer snapshots than the recommended cadence."""


@dataclass
class Certificate:
    """Outcome of one inequality test ``lhs <= rhs``.

    ``margin = (rhs - lhs) / |rhs|``: positive when the test passes.
    """

    name: str
    passed: bool
    lhs: float
    rhs: float
    margin: float
    details: dict = field(default_factory=dict)

    def cell(self) -> str:
        return f"{self.name}:{'pass' if self.passed else 'fail'}:{self.margin:.6e}"

    def record(self) -> dict:
        return {"name": self.name, "pass": bool(self.passed), "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, **self.details}


def _certificate(name: str, lhs: float, rhs: float, slack: float = 0.0, **details) -> Certificate:
    bound = rhs * (1.0 + slack)
    margin = (bound - lhs) / abs(bound) if bound != 0 else (0.0 if lhs <= 0 else -math.inf)
    return Certificate(name, bool(lhs <= bound), float(lhs), float(rhs), float(margin), details)


# ---------------------------------------------------------------------------
# Time quadrature and per-snapshot quantities
# ---------------------------------------------------------------------------


def time_integral(times: np.ndarray, values: np.ndarray, t0: float = 0.0, t1: float | None = None,
                  warn: bool = True) -> float:
    """Trapezoid rule on ``[t0, t1]`` with linear interpolation at the ends."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if t1 is None:
        t1 = float(times[-1])
    if t0 < times[0] - 1e-12 or t1 > times[-1] + 1e-12 or t1 < t0:
        raise ValueError(f"window [{t0}, {t1}] outside snapshot range")
    inner = (times > t0) & (times < t1)
    ts = np.concatenate([[t0], times[inner], [t1]])
    vs = np.concatenate([[np.interp(t0, times, values)], values[inner], [np.interp(t1, times, values)]])
    if warn and inner.sum() + 2 < MIN_SNAPSHOTS and t1 > t0:
        warnings.warn(
            f"only {inner.sum() + 2} snapshots in [{t0:g}, {t1:g}]; at least {MIN_SNAPSHOTS} recommended",
            SparseSnapshotWarning,
            stacklevel=3,
        )
    return float(np.trapezoid(vs, ts))


def _per_snapshot(traj: Trajectory, key, fun: Callable[[int], float]) -> np.ndarray:
    if key not in traj.cache:
        traj.cache[key] = np.array([fun(i) for i in range(len(traj))])
    return traj.cache[key]


def _enstrophy_series(traj: Trajectory) -> np.ndarray:
    return _per_snapshot(traj, "enstrophy", lambda i: l2(traj.snapshots[i]) ** 2)


def _grad_omega_series(traj: Trajectory) -> np.ndarray:
    g = traj.grid

    def fun(i):
        s = g.fft(traj.snapshots[i].values)
        return float(np.sum(g.lap_symbol * np.abs(s) ** 2) * g.area / g.n**4)

    return _per_snapshot(traj, "grad_omega", fun)


def dissipation_total(traj: Trajectory, delta: float = 0.0) -> float:
    """``nu int_delta^T ||w||^2 dt`` (equal to ``nu int ||grad u||^2``)."""
    return traj.nu * time_integral(traj.times, _enstrophy_series(traj), delta)


def grad_u_integral(traj: Trajectory, delta: float = 0.0, t1: float | None = None) -> float:
    """``int_delta^t1 ||grad u||^2 dt`` (uses ``||grad u|| = ||w||``)."""
    return time_integral(traj.times, _enstrophy_series(traj), delta, t1)


def _check_ell(traj: Trajectory, ell: float) -> None:
    if ell < 4.0 * traj.grid.spacing:
        raise ValueError(f"under-resolved ell={ell:g} < 4*spacing={4 * traj.grid.spacing:g}")


def structure_function(traj: Trajectory, ell: float, delta: float = 0.0, method: str = "spectral") -> float:
    """``int_delta^T avg_{|y|<ell} ||u(.+y) - u||^2 dt``.

    Uses ``2 ||u||^2 - 2 avg_{B_ell} R`` with ``R`` the autocorrelation of
    ``u``.  ``method="spectral"`` averages ``R`` over the disk with the exact
    disk transform ``2 J1(|k| ell)/(|k| ell)`` (exact for trigonometric
    polynomials); ``method="grid"`` builds ``R`` by FFT and averages it with
    the sampled disk of :func:`ball_convolve`.
    """
    _check_ell(traj, ell)
    g = traj.grid
    if method == "spectral":
        sym = 2.0 * (1.0 - disk_average_symbol(g.kmag, ell))

        def fun(i):
            s = traj.velocity(i).spectrum
            return float(np.sum(sym * (np.abs(s[0]) ** 2 + np.abs(s[1]) ** 2)) * g.area / g.n**4)
    elif method == "grid":
        area = disk_area(g, ell)

        def fun(i):
            s = traj.velocity(i).spectrum
            R = ScalarField(g, g.cell_area * g.ifft(np.abs(s[0]) ** 2 + np.abs(s[1]) ** 2))
            avg = ball_convolve(R, ell).values[0, 0] / area
            return 2.0 * (R.values[0, 0] - avg)
    else:
        raise ValueError(f"unknown method {method!r}")
    series = _per_snapshot(traj, ("s2", float(ell), method), fun)
    return time_integral(traj.times, series, delta)


def _reference_velocity(traj: Trajectory, u_ref, i: int) -> VectorField | None:
    if u_ref is None or (isinstance(u_ref, str) and u_ref == "zero_ref"):
        return None
    if isinstance(u_ref, Trajectory):
        t = traj.times[i]
        tr = u_ref.times
        if t < tr[0] - 1e-12 or t > tr[-1] + 1e-12:
            raise ValueError("reference trajectory does not cover the snapshot times")
        j = int(np.searchsorted(tr, t - 1e-12))
        j = min(max(j, 0), len(tr) - 1)
        if abs(tr[j] - t) <= 1e-9 or j == 0:
            v = u_ref.velocity(j)
        else:
            a = (t - tr[j - 1]) / (tr[j] - tr[j - 1])
            v = (1 - a) * u_ref.velocity(j - 1) + a * u_ref.velocity(j)
        return resample(v, traj.grid)
    if isinstance(u_ref, VectorField):
        return resample(u_ref, traj.grid)
    raise TypeError("u_ref must be None, 'zero_ref', a Trajectory or a VectorField")


def lambda_con(traj: Trajectory, ell: float, u_ref=None, delta: float = 0.0) -> float:
    """``int_delta^T (sup_x int_{B_ell(x)} |u - u_ref|^2)^{1/2} dt``.

    ``u_ref`` is ``None``/``"zero_ref"`` (zero reference), a reference
    :class:`Trajectory` (interpolated in time and resampled spectrally) or
    a fixed :class:`VectorField`.
    """
    _check_ell(traj, ell)
    if u_ref is traj:
        return 0.0

    def fun(i):
        u = traj.velocity(i)
        ref = _reference_velocity(traj, u_ref, i)
        d = u if ref is None else u - ref
        return math.sqrt(max(float(np.max(ball_convolve(d.magnitude_sq(), ell).values)), 0.0))

    key = ("lambda", float(ell), id(u_ref) if not isinstance(u_ref, str) else u_ref)
    series = np.array([fun(i) for i in range(len(traj))]) if u_ref is not None else _per_snapshot(traj, key, fun)
    return time_integral(traj.times, series, delta)


def omega_con(traj: Trajectory, ell: float, delta: float = 0.0) -> float:
    """``int_delta^T sup_x int_{B_ell(x)} |w| dt``."""
    _check_ell(traj, ell)
    series = _per_snapshot(
        traj, ("omega_con", float(ell)),
        lambda i: float(np.max(ball_convolve(abs(traj.snapshots[i]), ell).values)),
    )
    return time_integral(traj.times, series, delta)


def _q_density(u: VectorField, ell: float) -> np.ndarray:
    area = disk_area(u.grid, ell)
    c1 = ball_convolve(u.magnitude_sq(), ell).values
    c2 = ball_convolve(u, ell).values
    return np.maximum(c1 - (c2[0] ** 2 + c2[1] ** 2) / area, 0.0)


def q_con(traj: Trajectory, ell: float, delta: float = 0.0) -> float:
    """``int_delta^T (sup_x int_{B_ell(x)} |u - avg_{B_ell(x)} u|^2)^{1/2} dt``.

    The local variance is ``C1 - |C2|^2 / |B|`` with ``C1``, ``C2`` the ball
    integrals of ``|u|^2`` and ``u`` and ``|B|`` the sampled disk area;
    negative round-off is clipped to zero.
    """
    _check_ell(traj, ell)
    series = _per_snapshot(
        traj, ("q_con", float(ell)),
        lambda i: math.sqrt(float(np.max(_q_density(traj.velocity(i), ell)))),
    )
    return time_integral(traj.times, series, delta)


def omega_hat_field(omega: ScalarField, nu: float) -> ScalarField:
    """``|w(x)| int_{B_sqrt(nu)(x)} |w|``."""
    aw = abs(omega)
    return ScalarField(omega.grid, aw.values * ball_convolve(aw, math.sqrt(nu)).values)


def modulus_of_compactness(family: Sequence[VectorField], eps_list: Sequence[float]) -> dict:
    """``Phi(eps) = sup_n ||mollify(u_n, eps) - u_n||_{L^2}`` for each ``eps``."""
    out = {}
    for eps in eps_list:
        out[float(eps)] = max(l2(mollify(u, eps) - u) for u in family)
    return out


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


@dataclass
class DriftResult:
    """Constant fitted at the largest viscosity and its drift over a sweep."""

    name: str
    nus: list
    ratios: list
    C_ref: float
    drift: float
    passed: bool

    def record(self) -> dict:
        return {"name": self.name, "nus": self.nus, "ratios": self.ratios, "C_ref": self.C_ref,
                "drift": self.drift, "pass": bool(self.passed)}


def fit_drift(name: str, ratios_by_nu: dict, budget: float = DRIFT_BUDGET) -> DriftResult:
    """Fit ``C = lhs/envelope`` at the largest ``nu``; pass if no ratio exceeds ``budget * C``."""
    nus = sorted(ratios_by_nu, reverse=True)
    ratios = [float(ratios_by_nu[nu]) for nu in nus]
    c_ref = ratios[0]
    if c_ref <= 0:
        drift = 0.0 if max(ratios) <= 0 else math.inf
    else:
        drift = max(ratios) / c_ref
    return DriftResult(name, [float(n) for n in nus], ratios, float(c_ref), float(drift), bool(drift <= budget))


def s2_certificate(traj: Trajectory, ell: float, delta: float = 0.0, slack: float = 1e-2) -> Certificate:
    """Constant-free bound ``S2(ell) <= ell^2 int_delta^T ||grad u||^2``."""
    lhs = structure_function(traj, ell, delta)
    rhs = ell**2 * grad_u_integral(traj, delta)
    return _certificate("s2_bound", lhs, rhs, slack, ell=ell, delta=delta)


def higher_order_certificate(traj: Trajectory, delta: float, slack: float = 1e-3) -> Certificate:
    """``nu^2 int_delta^T ||grad w||^2 <= ||u0||^2 / delta`` (unforced)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    lhs = traj.nu**2 * time_integral(traj.times, _grad_omega_series(traj), delta)
    rhs = l2(traj.velocity(0)) ** 2 / delta
    return _certificate("higher_order", lhs, rhs, slack, delta=delta)


def monotonicity_certificates(traj: Trajectory, l1_tol: float = 1e-6, enstrophy_tol: float = 1e-3) -> list:
    """L1 monotonicity of ``w`` and the enstrophy decay bound, as certificates."""
    rep = monotonicity_checks(traj, l1_tol, enstrophy_tol)
    return [
        _certificate("l1_monotone", rep.l1_max_ratio, 1.0, l1_tol),
        _certificate("enstrophy_decay", rep.enstrophy_max_ratio, 1.0, enstrophy_tol),
    ]


def short_time_certificate(trajs: Sequence[Trajectory], eps: float, delta: float,
                           budget: float = DRIFT_BUDGET) -> dict:
    """Short-time control by the compactness modulus of the initial data.

    Tests ``||u(delta) - u0||^2 <= C (Phi(eps) + delta/eps^2)`` and
    ``nu int_0^delta ||grad u||^2 <= C (Phi(eps) + delta/eps^2)^{1/2}``
    with constants fitted on the largest viscosity.
    """
    phi = modulus_of_compactness([t.velocity(0) for t in trajs], [eps])[float(eps)]
    env = phi + delta / eps**2
    disp = {}
    diss = {}
    for tr in trajs:
        u0 = tr.velocity(0)
        ud = _velocity_at(tr, delta)
        disp[tr.nu] = l2(ud - u0) ** 2 / env
        diss[tr.nu] = tr.nu * grad_u_integral(tr, 0.0, delta) / math.sqrt(env)
    a = fit_drift("short_time_displacement", disp, budget)
    b = fit_drift("short_time_dissipation", diss, budget)
    return {"phi": phi, "envelope": env, "displacement": a, "dissipation": b,
            "passed": a.passed and b.passed}


def _velocity_at(traj: Trajectory, t: float) -> VectorField:
    times = traj.times
    j = int(np.searchsorted(times, t - 1e-12))
    j = min(max(j, 0), len(times) - 1)
    if abs(times[j] - t) <= 1e-9 or j == 0:
        return traj.velocity(j)
    a = (t - times[j - 1]) / (times[j] - times[j - 1])
    return (1 - a) * traj.velocity(j - 1) + a * traj.velocity(j)


@dataclass
class KolmogorovReport:
    """Constant-free check and constant-bearing ratios at ``ell = scale * sqrt(nu)``."""

    nu: float
    ell: float
    delta: float
    constant_free: Certificate
    ratios: dict
    values: dict


def kolmogorov_equivalence_report(traj: Trajectory, delta: float, scale: float = 1.0, u_ref=None,
                                  slack: float = 1e-2) -> KolmogorovReport | None:
    """Dissipation versus structure-function and concentration functionals.

    Returns ``None`` (with a warning) if ``scale * sqrt(nu)`` is below four
    grid spacings.  The ratios (measured side over envelope shape) feed
    :func:`fit_drift` across a viscosity sweep.
    """
    nu = traj.nu
    ell = scale * math.sqrt(nu)
    if ell < 4.0 * traj.grid.spacing:
        warnings.warn(f"ell={ell:g} under-resolved for nu={nu:g} on n={traj.grid.n}; excluded",
                      RuntimeWarning, stacklevel=2)
        return None
    s2_full = structure_function(traj, ell, 0.0)
    diss_full = nu * grad_u_integral(traj, 0.0)
    # constant-free: S2(ell) <= ell^2 int ||grad u||^2 = scale^2 * nu int ||grad u||^2
    cf = _certificate("s2_bound", s2_full, scale**2 * diss_full, slack, ell=ell)
    diss_d = nu * grad_u_integral(traj, delta)
    ens_d = nu * grad_u_integral(traj, delta)  # nu int ||w||^2
    s2_d = structure_function(traj, ell, delta)
    om = omega_con(traj, ell, delta)
    qc = q_con(traj, ell, delta)
    lc = lambda_con(traj, ell, u_ref, delta)
    ref_term = 0.0
    if u_ref is not None and not isinstance(u_ref, str):
        ref_term = _ref_ball_term(traj, ell, u_ref, delta)

    def best(con):
        return min(con / e + math.sqrt(e / delta) for e in EPS_SCAN)

    ratios = {
        "diss_vs_s2": diss_d * math.sqrt(delta) / math.sqrt(s2_d) if s2_d > 0 else math.inf,
        "diss_vs_omega_con": ens_d / best(om),
        "diss_vs_q_con": ens_d / best(qc),
        "diss_vs_lambda_con": ens_d / min(lc / e + ref_term + math.sqrt(e / delta) for e in EPS_SCAN),
        "q_con_vs_diss": qc / math.sqrt(diss_full) if diss_full > 0 else math.inf,
        "omega_con_vs_diss": om / math.sqrt(diss_full) if diss_full > 0 else math.inf,
    }
    values = {"s2": s2_d, "diss": diss_d, "omega_con": om, "q_con": qc, "lambda_con": lc}
    return KolmogorovReport(nu, ell, delta, cf, ratios, values)


def _ref_ball_term(traj, ell, u_ref, delta):
    series = []
    for i in range(len(traj)):
        ref = _reference_velocity(traj, u_ref, i)
        series.append(math.sqrt(max(float(np.max(ball_convolve(ref.magnitude_sq(), ell).values)), 0.0)))
    return time_integral(traj.times, np.array(series), delta, warn=False)


@dataclass
class RateResult:
    """Dissipation rate envelope for a viscosity family."""

    beta_name: str
    delta: float
    nus: list
    lhs: list
    envelope_shape: list
    side_condition: list
    drift: DriftResult

    @property
    def passed(self) -> bool:
        return self.drift.passed

    def record(self) -> dict:
        return {"beta_name": self.beta_name, "delta": self.delta, "nus": self.nus, "lhs": self.lhs,
                "envelope_shape": self.envelope_shape, "side_condition": self.side_condition,
                "C": self.drift.C_ref, "drift": self.drift.drift, "pass": bool(self.passed)}


def rate_certificate(trajs: Sequence[Trajectory], beta: BetaFunction, delta: float,
                     tables: InverseTables | None = None, budget: float = DRIFT_BUDGET) -> RateResult:
    """``nu int_delta^T ||grad u||^2 <= C sqrt((T/delta)(G_beta(sqrt nu) + log(1/nu)^{-1/2}))``.

    ``C`` is fitted at the largest viscosity; the others must stay within
    ``budget`` times the fitted envelope.  The side condition
    ``T (G_beta(sqrt nu) + log(1/nu)^{-1/2}) <= 1/2`` is reported per
    viscosity.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    tables = tables or build_inverses(beta)
    nus, lhs, shape, side = [], [], [], []
    ratios = {}
    for tr in sorted(trajs, key=lambda t: -t.nu):
        nu = tr.nu
        if not 0 < nu < 1:
            raise ValueError("rate envelope needs 0 < nu < 1")
        gt = float(tables.G(math.sqrt(nu))) + 1.0 / math.sqrt(math.log(1.0 / nu))
        env = math.sqrt(tr.T / delta * gt)
        val = nu * grad_u_integral(tr, delta)
        nus.append(nu)
        lhs.append(val)
        shape.append(env)
        side.append(bool(tr.T * gt <= 0.5))
        ratios[nu] = val / env
    drift = fit_drift("rate", ratios, budget)
    return RateResult(beta.label(), float(delta), nus, lhs, shape, side, drift)


# ---------------------------------------------------------------------------
# Weak-* pairings and atoms
# ---------------------------------------------------------------------------


@dataclass
class PairingRecord:
    values: list
    limit: float
    error: float


def _as_values(phi, grid):
    if isinstance(phi, ScalarField):
        return phi.values
    if callable(phi):
        x1, x2 = grid.mesh()
        return np.asarray(phi(x1, x2), dtype=float) * np.ones_like(x1)
    return np.asarray(phi, dtype=float)


def weak_star_pairing(densities: Sequence[ScalarField], phi) -> PairingRecord:
    """``<rho_n, phi>`` by node quadrature, with a limit estimate.

    ``phi`` is a :class:`ScalarField`, an array or a callable ``phi(x1, x2)``.
    The limit uses Aitken extrapolation when at least three values form a
    geometrically converging sequence; the error is the last increment.
    """
    vals = [d.grid.integrate(d.values * _as_values(phi, d.grid)) for d in densities]
    limit = vals[-1]
    err = abs(vals[-1] - vals[-2]) if len(vals) >= 2 else math.inf
    if len(vals) >= 3:
        a, b, c = vals[-3:]
        den = (c - b) - (b - a)
        if den != 0 and abs(c - b) < abs(b - a):
            limit = c - (c - b) ** 2 / den
    return PairingRecord([float(v) for v in vals], float(limit), float(err))


def tensor_pairing(a: ScalarField, b: ScalarField, phi, psi) -> float:
    """``<a (x) b, phi (x) psi> = <a, phi> <b, psi>``."""
    return a.grid.integrate(a.values * _as_values(phi, a.grid)) * b.grid.integrate(b.values * _as_values(psi, b.grid))


@dataclass
class AtomRecord:
    x0: tuple
    radii: list
    masses: list
    score: float


def atom_mass(density: ScalarField, x0, radii: Sequence[float]) -> AtomRecord:
    """Mass of ``density`` in ``B_r(x0)`` for each radius (direct node sum).

    The score is the mass at the smallest radius.
    """
    g = density.grid
    radii = sorted((float(r) for r in radii), reverse=True)
    if radii[-1] < g.spacing:
        raise ValueError("radius below grid spacing")
    x1, x2 = g.mesh()
    d1 = np.abs(x1 - x0[0]) % (2 * np.pi)
    d2 = np.abs(x2 - x0[1]) % (2 * np.pi)
    dist = np.hypot(np.minimum(d1, 2 * np.pi - d1), np.minimum(d2, 2 * np.pi - d2))
    masses = [g.integrate(np.where(dist <= r, density.values, 0.0)) for r in radii]
    return AtomRecord(tuple(float(c) for c in x0), radii, [float(m) for m in masses], float(masses[-1]))


# ---------------------------------------------------------------------------
# Table
# ---------------------------------------------------------------------------

TABLE_COLUMNS = ("nu", "ell", "delta", "diss_total", "s2", "lambda_con", "omega_con", "q_con")


@dataclass
class DiagnosticTable:
    """Rows of functionals plus ``name:pass:margin`` certificate cells."""

    rows: list = field(default_factory=list)

    def add_row(self, nu, ell, delta, values: dict, certificates: Sequence[Certificate]) -> None:
        row = {"nu": nu, "ell": ell, "delta": delta}
        for c in TABLE_COLUMNS[3:]:
            row[c] = values.get(c, float("nan"))
        row["certificates"] = list(certificates)
        self.rows.append(row)

    def certificate_names(self) -> list:
        names = []
        for r in self.rows:
            for c in r["certificates"]:
                if c.name not in names:
                    names.append(c.name)
        return names

    def to_csv(self, path) -> Path:
        path = Path(path)
        names = self.certificate_names()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(TABLE_COLUMNS) + names)
            for r in self.rows:
                cells = {c.name: c.cell() for c in r["certificates"]}
                w.writerow([repr(float(r[c])) for c in TABLE_COLUMNS] + [cells.get(n, "") for n in names])
        return path

    @staticmethod
    def read_csv(path) -> list:
        """Parse a table written by :meth:`to_csv` into dictionaries."""
        out = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                row = {c: float(rec[c]) for c in TABLE_COLUMNS}
                certs = {}
                for k, v in rec.items():
                    if k in TABLE_COLUMNS or not v:
                        continue
                    name, status, margin = v.rsplit(":", 2)
                    certs[name] = (status == "pass", float(margin))
                row["certificates"] = certs
                out.append(row)
        return out

    @property
    def all_passed(self) -> bool:
        return all(c.passed for r in self.rows for c in r["certificates"])
