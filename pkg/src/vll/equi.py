"""Superlinear functions, their inverse gauges and ball-decay certificates.

For a convex superlinear ``beta`` with ``beta(0) = 0`` define

* ``g_beta``: inverse of ``s -> s / beta(s)`` on ``[s0, inf)``;
* ``G_beta``: inverse of ``eps -> eps / g_beta(eps)`` on ``[0, c1]``;

where ``s0`` is the first point of a doubling search at which
``s beta'(s) - beta(s) > 0``.  The constants are ``c1 = s0 / beta(s0)``,
``c2 = s0`` and ``c3 = c1 / g_beta(c1)``.  All inverses are computed by
vectorized geometric bisection.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .spectral import ScalarField, TorusGrid, ball_convolve

__all__ = [
    "BetaFunction",
    "InverseTables",
    "BallDecayResult",
    "LogCutoffResult",
    "power_beta",
    "slog_beta",
    "beta_from_name",
    "build_inverses",
    "ball_decay_certificate",
    "log_cutoff_bound",
    "cutoff_chi",
    "cutoff_grad_norm_sq",
]

_REL_TOL = 1e-12


@dataclass(frozen=True)
class BetaFunction:
    """A convex superlinear function ``beta: [0, inf) -> [0, inf)``.

    Construction runs a superlinearity probe (``beta(s)/s`` grows by a
    factor >= 10 between ``s`` and ``1e6 s``) and a midpoint-convexity
    probe on 100 seeded random pairs; failure raises ``ValueError``.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)
    validate: bool = True

    def __post_init__(self):
        if self.validate:
            _probe(self)

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))

    def derivative(self, s):
        """Central difference with step ``1e-6 * s``."""
        s = np.asarray(s, dtype=float)
        h = 1e-6 * s
        return (self(s + h) - self(s - h)) / (2.0 * h)

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"


def _probe(beta: BetaFunction) -> None:
    with np.errstate(all="ignore"):
        if abs(float(beta(0.0))) > 1e-300:
            raise ValueError("β not in 𝒦: beta(0) != 0")
        s_ref = 1.0
        ratio = (float(beta(1e6 * s_ref)) / (1e6 * s_ref)) / (float(beta(s_ref)) / s_ref)
        if not np.isfinite(ratio) or ratio < 10.0:
            raise ValueError("β not in 𝒦: superlinearity probe failed")
        rng = np.random.default_rng(12345)
        a = 10.0 ** rng.uniform(-3, 3, 100)
        b = 10.0 ** rng.uniform(-3, 3, 100)
        mid = beta(0.5 * (a + b))
        chord = 0.5 * (beta(a) + beta(b))
        if np.any(~np.isfinite(mid)) or np.any(mid > chord * (1.0 + 1e-12) + 1e-300):
            raise ValueError("β not in 𝒦: convexity probe failed")


def power_beta(p: float) -> BetaFunction:
    """``beta(s) = s^p`` with ``p > 1``."""
    p = float(p)
    return BetaFunction("power", lambda s: np.power(s, p), {"p": p})


def slog_beta() -> BetaFunction:
    """``beta(s) = s log(e + s)`` (the borderline Orlicz class)."""
    return BetaFunction("slog", lambda s: s * np.log(np.e + s), {})


def beta_from_name(name: str, **params) -> BetaFunction:
    """Registry lookup: ``power`` (param ``p``) or ``slog``."""
    if name == "power":
        return power_beta(params.get("p", 2.0))
    if name == "slog":
        return slog_beta()
    raise ValueError(f"unknown beta {name!r}")


# ---------------------------------------------------------------------------
# Inverse gauges
# ---------------------------------------------------------------------------


def _geometric_bisect(fun, target, lo, hi, increasing: bool, rel_tol=_REL_TOL, max_iter=200):
    """Solve ``fun(x) = target`` elementwise for ``x`` in ``[lo, hi]`` (positive)."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(max_iter):
        mid = np.sqrt(lo) * np.sqrt(hi)  # lo * hi may overflow
        val = fun(mid)
        go_up = (val < target) if increasing else (val > target)
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
        if np.all(hi <= lo * (1.0 + rel_tol)):
            break
    return np.sqrt(lo) * np.sqrt(hi)


@dataclass
class InverseTables:
    """Constants and vectorized inverse gauges of a :class:`BetaFunction`."""

    beta: BetaFunction
    s0: float
    c1: float
    c2: float
    c3: float

    def h(self, s):
        """``s / beta(s)``."""
        s = np.asarray(s, dtype=float)
        return s / self.beta(s)

    def g(self, eps):
        """``g_beta(eps)`` for ``0 < eps <= c1`` (decreasing, ``g(c1) = s0``)."""
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        if np.any(eps <= 0) or np.any(eps > self.c1 * (1 + 1e-12)):
            raise ValueError("g_beta is defined on (0, c1]")
        eps = np.minimum(eps, self.c1)
        lo = np.full_like(eps, self.s0)
        hi = np.full_like(eps, self.s0)
        with np.errstate(all="ignore"):
            for _ in range(2100):
                hv = self.h(hi)
                if np.any(~np.isfinite(hi)) or np.any(~np.isfinite(hv) | (hv <= 0)):
                    raise OverflowError("g_beta(eps) lies beyond the floating-point range")
                need = hv > eps
                if not np.any(need):
                    break
                hi = np.where(need, hi * 2.0, hi)
            lo = np.where(hi > self.s0, hi / 2.0, lo)
            lo = np.maximum(lo, self.s0)
            out = _geometric_bisect(self.h, eps, lo, hi, increasing=False)
        return out

    def m(self, eps):
        """``eps / g_beta(eps)``."""
        eps = np.asarray(eps, dtype=float)
        return eps / self.g(eps)

    def G(self, s):
        """``G_beta(s)`` for ``0 <= s <= c3`` (increasing, ``G(0) = 0``)."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s_arr < 0) or np.any(s_arr > self.c3 * (1 + 1e-12)):
            raise ValueError(f"G_beta is defined on [0, c3] = [0, {self.c3:.6g}]")
        out = np.zeros_like(s_arr)
        pos = s_arr > 0
        if np.any(pos):
            sp = np.minimum(s_arr[pos], self.c3)
            # m = eps / g(eps) is increasing; halve eps from c1 until m(eps) <= s.
            # (The crude bracket eps >= c2 s can put g out of floating range.)
            hi = np.full_like(sp, self.c1)
            lo = hi.copy()
            for _ in range(2100):
                need = self.m(lo) > sp
                if not np.any(need):
                    break
                lo = np.where(need, lo / 2.0, lo)
            hi = np.minimum(2.0 * lo, self.c1)
            out[pos] = _geometric_bisect(self.m, sp, lo, hi, increasing=True)
        if np.ndim(s) == 0:
            return float(out[0])
        return out.reshape(np.shape(s))


def build_inverses(beta: BetaFunction) -> InverseTables:
    """Locate ``s0`` by doubling from 1 and assemble :class:`InverseTables`."""
    s = 1.0
    for _ in range(2000):
        b = float(beta(s))
        if b > 0 and s * float(beta.derivative(s)) - b > 0:
            break
        s *= 2.0
    else:
        raise ValueError("β not in 𝒦: no point with s beta'(s) > beta(s)")
    s0 = s
    c1 = s0 / float(beta(s0))
    c2 = s0
    tables = InverseTables(beta, s0, c1, c2, float("nan"))
    tables.c3 = float(c1 / tables.g(c1)[0])
    return tables


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


@dataclass
class BallDecayResult:
    beta_name: str
    radii: list
    empirical: list
    envelope: list
    ratios: list
    fitted_C: float
    flagged: bool

    @property
    def passed(self) -> bool:
        return not self.flagged

    def records(self) -> list[dict]:
        return [
            {
                "beta_name": self.beta_name,
                "r": r,
                "empirical": e,
                "envelope": self.fitted_C * env,
                "fitted_C": self.fitted_C,
                "pass": bool(not self.flagged),
            }
            for r, e, env in zip(self.radii, self.empirical, self.envelope)
        ]

    def to_json(self) -> str:
        return json.dumps(self.records(), indent=2)


def ball_decay_certificate(fields: Sequence[ScalarField], beta: BetaFunction, radii: Sequence[float],
                           tables: InverseTables | None = None) -> BallDecayResult:
    """Test ``sup_{n,x} int_{B_r(x)} |f_n| <= C G_beta(r^2)`` on a family.

    The fitted ``C`` is the largest ratio over the radii; the family is
    flagged when the ratio at the smallest radius exceeds twice the ratio
    at the largest radius.  Radii below ``4h`` are rejected.
    """
    if not fields:
        raise ValueError("empty family")
    tables = tables or build_inverses(beta)
    radii = sorted(float(r) for r in radii)
    h = max(f.grid.spacing for f in fields)
    if radii[0] < 4.0 * h:
        raise ValueError(f"radius {radii[0]:g} below 4*spacing={4 * h:g}")
    emp = []
    env = []
    for r in radii:
        if r * r > tables.c3:
            raise ValueError(f"r^2={r * r:g} outside the domain of G_beta (c3={tables.c3:g})")
        sup = max(float(np.max(ball_convolve(abs(f), r).values)) for f in fields)
        emp.append(sup)
        env.append(float(tables.G(r * r)))
    ratios = [e / v for e, v in zip(emp, env)]
    flagged = ratios[0] > 2.0 * ratios[-1]
    return BallDecayResult(beta.label(), radii, emp, env, ratios, float(max(ratios)), bool(flagged))


def cutoff_chi(dist: np.ndarray, r: float) -> np.ndarray:
    """Logarithmic cutoff: 1 on ``B_r``, ``log(d/sqrt r)/log(sqrt r)`` up to ``sqrt r``, then 0."""
    if not 0 < r < 1:
        raise ValueError("cutoff radius must lie in (0, 1)")
    d = np.asarray(dist, dtype=float)
    sr = math.sqrt(r)
    out = np.zeros_like(d)
    out[d <= r] = 1.0
    ann = (d > r) & (d < sr)
    out[ann] = np.log(d[ann] / sr) / math.log(sr)
    return out


def cutoff_grad_norm_sq(r: float, n_nodes: int = 64) -> float:
    """``||grad chi_r||_{L^2}^2`` by polar Gauss-Legendre quadrature.

    The radial derivative of :func:`cutoff_chi` is taken by central
    differences, so this checks the implementation against the closed form
    ``4 pi / log(1/r)``.
    """
    sr = math.sqrt(r)
    # substitute rho = exp(t) to resolve the 1/rho^2 integrand
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    a, b = math.log(r), math.log(sr)
    t = 0.5 * (b - a) * x + 0.5 * (b + a)
    rho = np.exp(t)
    dh = 1e-7 * rho
    dchi = (cutoff_chi(rho + dh, r) - cutoff_chi(rho - dh, r)) / (2 * dh)
    integrand = dchi**2 * 2.0 * np.pi * rho * rho  # d(rho) = rho dt
    return float(0.5 * (b - a) * np.sum(w * integrand))


@dataclass
class LogCutoffResult:
    beta_name: str
    r: float
    empirical: float
    envelope: float
    fitted_C: float
    passed: bool
    shape: float
    cutoff_pairing: float
    chi_grad_sq: float
    chi_grad_sq_exact: float

    def record(self) -> dict:
        return {
            "beta_name": self.beta_name,
            "r": self.r,
            "empirical": self.empirical,
            "envelope": self.envelope,
            "fitted_C": self.fitted_C,
            "pass": bool(self.passed),
        }

    def to_json(self) -> str:
        return json.dumps(self.record(), indent=2)


def log_cutoff_bound(omega: ScalarField, beta: BetaFunction, r: float, C: float | None = None,
                     tables: InverseTables | None = None) -> LogCutoffResult:
    """Compare ``sup_x int_{B_r(x)} |w|`` with ``C (G_beta(r) + log(1/r)^{-1/2})``.

    With ``C=None`` the constant is fitted from this field (the envelope
    then equals the empirical value); pass a constant fitted on a
    calibration member to obtain a genuine test.  Also reports the pairing
    of ``|w|`` with the logarithmic cutoff centred at the maximizing node.
    """
    if not 0 < r < 1:
        raise ValueError("radius must lie in (0, 1)")
    tables = tables or build_inverses(beta)
    if r > tables.c3:
        raise ValueError("r outside the domain of G_beta")
    grid = omega.grid
    aw = abs(omega)
    balls = ball_convolve(aw, r).values
    emp = float(np.max(balls))
    shape = float(tables.G(r)) + 1.0 / math.sqrt(math.log(1.0 / r))
    if C is None:
        C = emp / shape
    env = C * shape
    # pairing with chi_r centred at the maximizing node
    i, j = np.unravel_index(int(np.argmax(balls)), balls.shape)
    chi = cutoff_chi(grid.offset_radius, r)
    chi = np.roll(np.roll(chi, i, axis=0), j, axis=1)
    pairing = grid.integrate(aw.values * chi)
    return LogCutoffResult(
        beta.label(), float(r), emp, float(env), float(C), bool(emp <= env * (1 + 1e-12)),
        shape, float(pairing), cutoff_grad_norm_sq(r), 4.0 * math.pi / math.log(1.0 / r),
    )


def _asdict(obj):  # pragma: no cover - convenience
    return asdict(obj)
