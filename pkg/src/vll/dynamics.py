"""Pseudo-spectral Navier-Stokes evolution in vorticity form.

The vorticity equation ``d_t w + u . grad w = nu Laplace w + curl f`` is
advanced with an integrating-factor (Lawson) form of Ralston's third-order
Runge-Kutta method: diffusion is integrated exactly through
``exp(-nu |k|^2 dt)``, advection explicitly with the 2/3 rule applied to
the nonlinear term.  The cumulative dissipation ``nu int ||w||^2`` and the
work ``int u . f`` are carried as extra ODE components so that they are
integrated by the same quadrature as the state.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .spectral import (
    ScalarField,
    TorusGrid,
    VectorField,
    biot_savart,
    fft_workers,
    l2,
)
from .spectral import l1 as l1_norm

logger = logging.getLogger(__name__)

__all__ = [
    "CFLWarning",
    "ResolutionWarning",
    "ForceSpec",
    "BalanceLedger",
    "Trajectory",
    "DecompositionPair",
    "MonotonicityReport",
    "minimal_n",
    "check_resolution",
    "evolve",
    "energy_balance_residual",
    "monotonicity_checks",
    "evolve_decomposition",
    "steady_residual",
    "leray_project",
]

# Ralston's third-order tableau (nodes are non-decreasing, so every
# integrating factor below has a non-positive exponent).
_C = (0.0, 0.5, 0.75)
_A21 = 0.5
_A32 = 0.75
_B = (2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0)
ORDER = 3

LEDGER_COLUMNS = (
    "t",
    "energy",
    "cumulative_dissipation",
    "enstrophy",
    "l1_vorticity",
    "balance_residual",
)


class CFLWarning(RuntimeWarning):
    """Emitted when the time step is halved to satisfy the CFL bound."""


class ResolutionWarning(RuntimeWarning):
    """Emitted when a grid is coarser than the resolution policy."""


# ---------------------------------------------------------------------------
# Resolution policy
# ---------------------------------------------------------------------------


def minimal_n(nu: float) -> int:
    """Smallest even grid size with ``n >= 8 / sqrt(nu)``."""
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    n = math.ceil(8.0 / math.sqrt(nu) - 1e-9)
    n = max(n, 4)
    return n + (n % 2)


def check_resolution(n: int, nu: float) -> None:
    """Raise ``ValueError`` naming the minimal ``n`` if the grid is too coarse."""
    need = minimal_n(nu)
    if n < need:
        raise ValueError(f"grid n={n} under-resolves nu={nu:g}; minimal n is {need}")


# ---------------------------------------------------------------------------
# Forcing
# ---------------------------------------------------------------------------


@dataclass
class ForceSpec:
    """Time-independent body force.

    ``kind`` is ``"none"``, ``"steady_analytic"`` (``name`` in
    ``{"shear", "cellular"}`` with params ``m`` and ``amplitude``) or
    ``"custom"`` (an explicit :class:`VectorField`).
    """

    kind: str = "none"
    name: str | None = None
    params: dict = field(default_factory=dict)
    custom: VectorField | None = None

    def __post_init__(self):
        if self.kind not in ("none", "steady_analytic", "custom"):
            raise ValueError(f"unknown force kind {self.kind!r}")
        if self.kind == "steady_analytic" and self.name not in ("shear", "cellular"):
            raise ValueError(f"unknown analytic force {self.name!r}")
        if self.kind == "custom" and self.custom is None:
            raise ValueError("custom force requires a field")

    @property
    def is_none(self) -> bool:
        return self.kind == "none"

    def field(self, grid: TorusGrid) -> VectorField | None:
        if self.kind == "none":
            return None
        if self.kind == "custom":
            if self.custom.grid.n != grid.n:
                raise ValueError("custom force lives on a different grid")
            return self.custom
        m = float(self.params.get("m", 1))
        amp = float(self.params.get("amplitude", 1.0))
        x1, x2 = grid.mesh()
        if self.name == "shear":
            vals = np.stack([np.sin(m * x2), np.zeros_like(x2)])
        else:
            vals = np.stack([np.sin(m * x1) * np.sin(m * x2), np.cos(m * x1) * np.cos(m * x2)])
        return VectorField(grid, amp * vals)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class BalanceLedger:
    """Per-step energy bookkeeping.

    ``enstrophy`` is ``||w||_{L^2}^2`` and ``balance_residual`` is
    ``(E(t) + D(t) - W(t) - E(0)) / E(0)`` with ``D`` the cumulative
    dissipation and ``W`` the cumulative work of the force.
    """

    t: np.ndarray
    energy: np.ndarray
    cumulative_dissipation: np.ndarray
    enstrophy: np.ndarray
    l1_vorticity: np.ndarray
    balance_residual: np.ndarray
    cumulative_work: np.ndarray

    def rows(self):
        cols = [getattr(self, c) for c in LEDGER_COLUMNS]
        return zip(*cols)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LEDGER_COLUMNS)
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])
        return path


@dataclass
class Trajectory:
    """Vorticity snapshots of one run plus its ledger and step parameters."""

    grid: TorusGrid
    nu: float
    times: np.ndarray
    snapshots: list
    ledger: BalanceLedger | None = None
    params: dict = field(default_factory=dict)
    force: ForceSpec = field(default_factory=ForceSpec)
    cache: dict = field(default_factory=dict, repr=False, compare=False)
    velocity_cache_bytes: int = field(default=256 * 2**20, repr=False, compare=False)

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def omega0(self) -> ScalarField:
        return self.snapshots[0]

    def velocity(self, i: int) -> VectorField:
        """Velocity of snapshot ``i``.

        Velocities are kept in a least-recently-used cache bounded by
        ``velocity_cache_bytes``; the stored snapshots themselves never keep
        a cached spectrum, so large sweeps stay within memory.
        """
        key = ("u", i)
        hit = self.cache.pop(key, None)
        if hit is None:
            w = self.snapshots[i]
            hit = biot_savart(ScalarField(self.grid, w.values))
            per_field = 6 * w.values.nbytes  # values plus cached complex spectrum
            limit = max(2, self.velocity_cache_bytes // per_field)
            held = [k for k in self.cache if isinstance(k, tuple) and k and k[0] == "u"]
            for k in held[: max(0, len(held) - limit + 1)]:
                del self.cache[k]
        self.cache[key] = hit  # (re)insert as most recent
        return hit

    def __len__(self) -> int:
        return len(self.snapshots)


@dataclass
class DecompositionPair:
    """Passive co-evolution of ``w = f + mu`` along a parent trajectory."""

    times: np.ndarray
    f: list
    mu: list
    sum_error: float
    mu_min_ratio: float

    def beta_integrals(self, beta) -> np.ndarray:
        """``int beta(|f(t)|)`` at every snapshot."""
        return np.array([fi.grid.integrate(beta(np.abs(fi.values))) for fi in self.f])


@dataclass
class MonotonicityReport:
    l1_max_ratio: float
    enstrophy_max_ratio: float
    l1_ok: bool
    enstrophy_ok: bool

    @property
    def passed(self) -> bool:
        return self.l1_ok and self.enstrophy_ok


# ---------------------------------------------------------------------------
# Solver internals (real-to-complex transforms)
# ---------------------------------------------------------------------------


class _RealSpectral:
    """Wavenumber tables for the half spectrum of an ``n x n`` grid."""

    def __init__(self, n: int):
        self.n = n
        k = np.fft.fftfreq(n, d=1.0 / n)
        kd1 = k.copy()
        kd1[n // 2] = 0.0
        k2 = np.arange(n // 2 + 1, dtype=float)
        kd2 = k2.copy()
        kd2[-1] = 0.0
        self.kd1 = kd1[:, None]
        self.kd2 = kd2[None, :]
        self.lap = self.kd1**2 + self.kd2**2
        self.inv_lap = np.zeros_like(self.lap)
        nz = self.lap > 0
        self.inv_lap[nz] = 1.0 / self.lap[nz]
        self.mask = np.maximum(np.abs(k)[:, None], k2[None, :]) <= n / 3.0
        # -mask with the mean removed: the advective term has zero mean
        self.neg_mask = -self.mask.astype(float)
        self.neg_mask[0, 0] = 0.0
        self.weight = np.full(self.lap.shape, 2.0)
        self.weight[:, 0] = 1.0
        self.weight[:, -1] = 1.0
        self.norm = (2.0 * np.pi) ** 2 / n**4
        # modes that are not representable by a velocity (kd = 0), mean excluded
        self.null = (self.lap == 0)
        self.null_nonmean = self.null.copy()
        self.null_nonmean[0, 0] = False
        self.workers = fft_workers()

    def rfft(self, x):
        return sfft.rfft2(x, workers=self.workers)

    def irfft(self, x):
        return sfft.irfft2(x, s=(self.n, self.n), workers=self.workers)

    def sumsq(self, a_hat) -> float:
        a2 = a_hat.real**2 + a_hat.imag**2
        return float(np.vdot(self.weight.ravel(), a2.ravel()) * self.norm)

    def inner(self, a_hat, b_hat) -> float:
        return float(np.sum(self.weight * (a_hat * np.conj(b_hat)).real) * self.norm)


def _filter_initial(w: np.ndarray, rs: _RealSpectral, keep_mean: bool) -> np.ndarray:
    w_hat = rs.rfft(w)
    w_hat[rs.null_nonmean] = 0.0
    if not keep_mean:
        w_hat[0, 0] = 0.0
    return w_hat


def _integrate(
    omega0: ScalarField,
    nu: float,
    T: float,
    dt: float,
    force: ForceSpec,
    snap_every: int,
    cfl: float,
    dt_min: float,
    tracers: Sequence[np.ndarray] = (),
):
    grid = omega0.grid
    n = grid.n
    rs = _RealSpectral(n)
    h = grid.spacing

    w_hat = _filter_initial(omega0.values, rs, keep_mean=False)
    tr_hats = [_filter_initial(np.asarray(t, float), rs, keep_mean=True) for t in tracers]

    f_field = force.field(grid)
    if f_field is not None:
        f_hat = np.stack([rs.rfft(f_field.values[0]), rs.rfft(f_field.values[1])])
        g_hat = 1j * rs.kd1 * f_hat[1] - 1j * rs.kd2 * f_hat[0]
        g_hat[rs.null] = 0.0
    else:
        f_hat = None
        g_hat = None

    m_u1 = 1j * rs.kd2 * rs.inv_lap  # u1_hat = m_u1 * w_hat
    m_u2 = -1j * rs.kd1 * rs.inv_lap
    m_d1 = 1j * rs.kd1
    m_d2 = 1j * rs.kd2
    n_fields = 4 + 2 * len(tracers)
    buf = np.empty((n_fields,) + rs.lap.shape, dtype=complex)

    def rhs(wh, trs):
        np.multiply(m_u1, wh, out=buf[0])
        np.multiply(m_u2, wh, out=buf[1])
        np.multiply(m_d1, wh, out=buf[2])
        np.multiply(m_d2, wh, out=buf[3])
        for j, th in enumerate(trs):
            np.multiply(m_d1, th, out=buf[4 + 2 * j])
            np.multiply(m_d2, th, out=buf[5 + 2 * j])
        work = 0.0
        if g_hat is not None:
            work = rs.inner(buf[0], f_hat[0]) + rs.inner(buf[1], f_hat[1])
        phys = rs.irfft(buf)
        u1, u2 = phys[0], phys[1]
        umax = float(np.sqrt(np.max(u1 * u1 + u2 * u2)))
        prods = phys[2::2]
        prods *= u1
        tmp = phys[3::2]
        tmp *= u2
        prods += tmp
        adv = rs.rfft(prods)
        adv *= rs.neg_mask
        nl = adv[0]
        trn = [adv[1 + j] for j in range(len(trs))]
        if g_hat is not None:
            nl = nl + g_hat
            if trn:
                trn[0] = trn[0] + g_hat
        diss = nu * rs.sumsq(wh)
        return nl, trn, diss, work, umax

    exps_cache: dict = {}

    def exps(step):
        if step not in exps_cache:
            a = -nu * rs.lap * step
            exps_cache[step] = {c: np.exp(a * c) for c in (0.25, 0.5, 0.75, 1.0)}
        return exps_cache[step]

    def energy_of(wh):
        return 0.5 * float(np.sum(rs.weight * np.abs(wh) ** 2 * rs.inv_lap) * rs.norm)

    def l1_of(wh):
        return float(np.sum(np.abs(rs.irfft(wh))) * grid.cell_area)

    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * T:
        n_steps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / n_steps
    if dt_min is None:
        dt_min = dt / 2**12

    E0 = energy_of(w_hat)
    D = 0.0
    W = 0.0
    t = 0.0
    level = 0
    ledger = {c: [] for c in ("t", "energy", "cumulative_dissipation", "enstrophy",
                              "l1_vorticity", "balance_residual", "cumulative_work")}

    def record():
        E = energy_of(w_hat)
        ledger["t"].append(t)
        ledger["energy"].append(E)
        ledger["cumulative_dissipation"].append(D)
        ledger["enstrophy"].append(rs.sumsq(w_hat))
        ledger["l1_vorticity"].append(l1_of(w_hat))
        ledger["balance_residual"].append((E + D - W - E0) / E0 if E0 > 0 else 0.0)
        ledger["cumulative_work"].append(W)

    snap_times = [0.0]
    snaps = [rs.irfft(w_hat)]
    tr_snaps = [[rs.irfft(th)] for th in tr_hats]
    record()
    warned_levels = set()

    for m in range(1, n_steps + 1):
        remaining = 2**level  # substeps of size dt / 2**level left in this macro step
        while remaining > 0:
            ds = dt / 2**level
            N1, T1, d1, p1, umax = rhs(w_hat, tr_hats)
            if ds * umax / h > cfl:
                level += 1
                remaining *= 2
                ds = dt / 2**level
                if ds < dt_min:
                    raise RuntimeError(
                        f"CFL condition cannot be met: dt={ds:.3e} below dt_min={dt_min:.3e} "
                        f"at t={t:.6g} (max|u|={umax:.4g})"
                    )
                if level not in warned_levels:
                    warnings.warn(
                        f"CFL number {ds * 2 * umax / h:.3f} exceeds {cfl}; halving dt to {ds:.3e} at t={t:.6g}",
                        CFLWarning,
                        stacklevel=3,
                    )
                    warned_levels.add(level)
                continue
            ex = exps(ds)
            w2 = ex[0.5] * (w_hat + ds * _A21 * N1)
            t2 = [ex[0.5] * (th + ds * _A21 * n1) for th, n1 in zip(tr_hats, T1)]
            N2, T2, d2, p2, _ = rhs(w2, t2)
            w3 = ex[0.75] * w_hat + ds * _A32 * ex[0.25] * N2
            t3 = [ex[0.75] * th + ds * _A32 * ex[0.25] * n2 for th, n2 in zip(tr_hats, T2)]
            N3, T3, d3, p3, _ = rhs(w3, t3)
            w_hat = ex[1.0] * (w_hat + ds * _B[0] * N1) + ds * (_B[1] * ex[0.5] * N2 + _B[2] * ex[0.25] * N3)
            tr_hats = [
                ex[1.0] * (th + ds * _B[0] * a) + ds * (_B[1] * ex[0.5] * b + _B[2] * ex[0.25] * c)
                for th, a, b, c in zip(tr_hats, T1, T2, T3)
            ]
            D += ds * (_B[0] * d1 + _B[1] * d2 + _B[2] * d3)
            W += ds * (_B[0] * p1 + _B[1] * p2 + _B[2] * p3)
            t += ds
            remaining -= 1
            if not np.all(np.isfinite(w_hat)):
                raise FloatingPointError(f"non-finite vorticity at t={t:.6g} (macro step {m})")
        t = m * dt
        record()
        if m % snap_every == 0 or m == n_steps:
            snap_times.append(t)
            snaps.append(rs.irfft(w_hat))
            for lst, th in zip(tr_snaps, tr_hats):
                lst.append(rs.irfft(th))

    led = BalanceLedger(**{k: np.asarray(v) for k, v in ledger.items()})
    params = dict(T=T, dt=dt, n_steps=n_steps, snap_every=snap_every, cfl=cfl,
                  dt_min=dt_min, final_level=level)
    return np.asarray(snap_times), snaps, led, params, tr_snaps


def evolve(
    omega0: ScalarField,
    nu: float,
    T: float,
    dt: float,
    force: ForceSpec | None = None,
    snap_every: int = 1,
    cfl: float = 0.5,
    dt_min: float | None = None,
) -> Trajectory:
    """Integrate the vorticity equation from ``omega0`` up to time ``T``.

    Parameters
    ----------
    omega0 : ScalarField
        Mean-zero initial vorticity.  Modes that carry no velocity (the
        pure-Nyquist modes) are removed.
    nu : float
        Viscosity (> 0).
    T, dt : float
        Final time and macro step.  ``dt`` is shrunk slightly if needed so
        that an integer number of steps lands on ``T``.
    force : ForceSpec, optional
        Steady body force.
    snap_every : int
        Store a snapshot every ``snap_every`` macro steps (the final time is
        always stored).
    cfl : float
        Bound on ``dt * max|u| / h``; violations halve the step (with a
        :class:`CFLWarning`) down to ``dt_min``.

    Returns
    -------
    Trajectory
    """
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    if snap_every < 1:
        raise ValueError("snap_every must be >= 1")
    if not np.all(np.isfinite(omega0.values)):
        raise ValueError("initial vorticity is not finite")
    if abs(omega0.mean()) > 1e-12 * max(float(np.max(np.abs(omega0.values))), 1e-300):
        raise ValueError("initial vorticity is not mean-zero")
    if omega0.grid.n < minimal_n(nu):
        warnings.warn(
            f"grid n={omega0.grid.n} is coarser than the resolution policy for nu={nu:g} "
            f"(minimal n {minimal_n(nu)})",
            ResolutionWarning,
            stacklevel=2,
        )
    force = force or ForceSpec()
    times, snaps, led, params, _ = _integrate(omega0, nu, T, dt, force, snap_every, cfl, dt_min)
    grid = omega0.grid
    fields = [ScalarField(grid, s) for s in snaps]
    return Trajectory(grid, float(nu), times, fields, led, params, force)


# ---------------------------------------------------------------------------
# Post-processing
# ---------------------------------------------------------------------------


def energy_balance_residual(traj: Trajectory) -> float:
    """``max_t |E(t) + nu int_0^t ||grad u||^2 - W(t) - E(0)| / E(0)`` (0 if ``E(0) = 0``)."""
    led = traj.ledger
    if led is None:
        raise ValueError("trajectory has no balance ledger")
    if led.energy[0] == 0.0:
        return 0.0
    return float(np.max(np.abs(led.balance_residual)))


def monotonicity_checks(traj: Trajectory, l1_tol: float = 1e-6, enstrophy_tol: float = 1e-3) -> MonotonicityReport:
    """Check ``||w(t)||_1 <= ||w0||_1`` and ``||w(t)||^2 <= ||u0||^2 / (2 t nu)``.

    The enstrophy bound is tested for ``t >= 10 dt``.  Only meaningful for
    unforced runs.  Without a balance ledger (e.g. snapshots read from
    files) the stored snapshots are used.
    """
    if not traj.force.is_none:
        raise ValueError("monotonicity checks require an unforced trajectory")
    led = traj.ledger
    if led is not None:
        t, l1, enstrophy, u0_sq = led.t, led.l1_vorticity, led.enstrophy, 2.0 * led.energy[0]
    else:
        t = np.asarray(traj.times, dtype=float)
        l1 = np.array([l1_norm(w) for w in traj.snapshots])
        enstrophy = np.array([l2(w) ** 2 for w in traj.snapshots])
        u0_sq = l2(traj.velocity(0)) ** 2
    l1_ratio = float(np.max(l1 / l1[0])) if l1[0] > 0 else 1.0
    dt = traj.params.get("dt", 0.0)
    sel = (t >= 10.0 * dt - 1e-14) & (t > 0)
    if np.any(sel) and u0_sq > 0:
        bound = u0_sq / (2.0 * t[sel] * traj.nu)
        ens_ratio = float(np.max(enstrophy[sel] / bound))
    else:
        ens_ratio = 0.0
    return MonotonicityReport(
        l1_max_ratio=l1_ratio,
        enstrophy_max_ratio=ens_ratio,
        l1_ok=l1_ratio <= 1.0 + l1_tol,
        enstrophy_ok=ens_ratio <= 1.0 + enstrophy_tol,
    )


def evolve_decomposition(traj: Trajectory, f0: ScalarField, mu0: ScalarField) -> DecompositionPair:
    """Transport ``f0`` and ``mu0`` with the velocity of ``traj``.

    Both parts are advected and diffused as passive scalars by the stage
    velocities of the parent run (the force, if any, acts on ``f``).  The
    parent run is replayed with the same steps, so ``f + mu`` reproduces
    the parent vorticity to round-off.
    """
    grid = traj.grid
    w0 = traj.snapshots[0].values
    if f0.grid.n != grid.n or mu0.grid.n != grid.n:
        raise ValueError("decomposition lives on a different grid")
    scale = max(float(np.max(np.abs(w0))), 1e-300)
    rs = _RealSpectral(grid.n)
    total = rs.irfft(_filter_initial(f0.values + mu0.values, rs, keep_mean=True))
    if np.max(np.abs(total - w0)) > 1e-10 * scale:
        raise ValueError("f0 + mu0 does not reproduce the initial vorticity")
    if np.min(mu0.values) < -1e-12 * max(float(np.max(mu0.values)), 1e-300):
        raise ValueError("mu0 must be non-negative")
    p = traj.params
    times, snaps, _, _, tr = _integrate(
        traj.snapshots[0], traj.nu, p["T"], p["dt"], traj.force, p["snap_every"],
        p["cfl"], p["dt_min"], tracers=(f0.values, mu0.values),
    )
    f_list = [ScalarField(grid, v) for v in tr[0]]
    mu_list = [ScalarField(grid, v) for v in tr[1]]
    sum_err = max(
        float(np.max(np.abs(a.values + b.values - w.values)))
        for a, b, w in zip(f_list, mu_list, traj.snapshots)
    ) / scale
    mu_max = max(float(np.max(m.values)) for m in mu_list)
    mu_min = min(float(np.min(m.values)) for m in mu_list)
    ratio = mu_min / mu_max if mu_max > 0 else 0.0
    return DecompositionPair(np.asarray(times), f_list, mu_list, sum_err, ratio)


def leray_project(v_hat: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Leray projection of a full-spectrum vector field ``(2, n, n)``."""
    k1, k2 = grid.deriv_wavevectors
    div = k1 * v_hat[0] + k2 * v_hat[1]
    corr = div * grid.inv_lap_symbol
    return np.stack([v_hat[0] - k1 * corr, v_hat[1] - k2 * corr])


def _pad(spec: np.ndarray, n: int, m: int) -> np.ndarray:
    """Zero-pad a full spectrum from ``n`` to ``m > n`` (Nyquist lines dropped)."""
    h = n // 2
    idx_s = np.r_[0:h, n - h + 1:n]
    idx_d = np.r_[0:h, m - h + 1:m]
    out = np.zeros(spec.shape[:-2] + (m, m), dtype=complex)
    out[..., idx_d[:, None], idx_d[None, :]] = spec[..., idx_s[:, None], idx_s[None, :]]
    return out * (m / n) ** 2


def _truncate(spec: np.ndarray, m: int, n: int) -> np.ndarray:
    h = n // 2
    idx_s = np.r_[0:h, m - h + 1:m]
    idx_d = np.r_[0:h, n - h + 1:n]
    out = np.zeros(spec.shape[:-2] + (n, n), dtype=complex)
    out[..., idx_d[:, None], idx_d[None, :]] = spec[..., idx_s[:, None], idx_s[None, :]]
    return out * (n / m) ** 2


def advective_term_hat(u: VectorField) -> np.ndarray:
    """Full spectrum of ``div(u (x) u)`` computed without aliasing (3/2 padding)."""
    g = u.grid
    n = g.n
    m = 3 * n // 2 + (3 * n // 2) % 2
    up = sfft.ifft2(_pad(u.spectrum, n, m), workers=fft_workers()).real
    prods = np.stack([up[0] * up[0], up[0] * up[1], up[1] * up[1]])
    ph = _truncate(sfft.fft2(prods, workers=fft_workers()), m, n)
    k1, k2 = g.deriv_wavevectors
    return np.stack([1j * k1 * ph[0] + 1j * k2 * ph[1], 1j * k1 * ph[1] + 1j * k2 * ph[2]])


def steady_residual(u: VectorField, f: VectorField | None, nu: float) -> float:
    """``|| P[div(u (x) u) - nu Laplace u - f] ||_{L^2}`` with ``P`` the Leray projector."""
    g = u.grid
    r = advective_term_hat(u) + nu * g.lap_symbol * u.spectrum
    if f is not None:
        r = r - f.spectrum
    pr = leray_project(r, g)
    return float(np.sqrt(g.parseval(pr[0]) + g.parseval(pr[1])))
