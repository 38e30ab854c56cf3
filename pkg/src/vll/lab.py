"""Experiment harness: configuration, viscosity sweeps, persistence and reports.

A run is described by an INI file (sections ``grid``, ``physics``,
``time``, ``initial``, ``force``, ``diagnostics``, ``beta``, ``output``).
Every viscosity is evolved independently; diagnostics are evaluated at
``ell = multiplier * sqrt(nu)`` for each configured multiplier and each
``delta``.  Outputs are deterministic: floats are written with ``repr``
and nothing time-dependent enters the CSV/JSON files.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import os
import platform
import re
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy.special import j0
from scipy.stats import kendalltau

from . import gallery
from .diagnostics import (
    Certificate,
    DiagnosticTable,
    fit_drift,
    higher_order_certificate,
    kolmogorov_equivalence_report,
    monotonicity_certificates,
    rate_certificate,
    s2_certificate,
    short_time_certificate,
)
from .dynamics import ForceSpec, Trajectory, evolve, minimal_n
from .equi import beta_from_name
from .spectral import (
    ScalarField,
    TorusGrid,
    VectorField,
    _bump_symbol,
    _bump_weights,
    read_snapshot,
    resample,
    write_snapshot,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "Report",
    "CONSTANT_FREE",
    "parse_config",
    "load_config",
    "auto_grid_n",
    "grid_for",
    "initial_vorticity",
    "run",
    "sweep",
    "diagnose",
    "render_report",
]

CONSTANT_FREE = ("s2_bound", "l1_monotone", "enstrophy_decay", "higher_order")
SUITE_SLACK = 1e-2  # relative factor allowed to every constant-free certificate of a run
INITIAL_KINDS = ("taylor_green", "shear", "random_smooth", "mollified_vortex", "vortex_sheet_approx", "gallery")
FORCE_KINDS = ("none", "shear", "cellular", "gallery")

_SCHEMA = {
    "grid": {"n"},
    "physics": {"nu_list"},
    "time": {"t", "dt", "snap_every", "cfl"},
    "initial": {"kind", "k", "seed", "spectrum_slope", "kmax", "amplitude", "sign", "scale", "mass",
                "radius", "name", "params"},
    "force": {"kind", "m", "amplitude"},
    "diagnostics": {"scales", "deltas", "u_ref", "short_time_eps"},
    "beta": {"name", "p"},
    "output": {"dir", "snapshots"},
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every violated constraint."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass
class RunConfig:
    nu_list: tuple
    T: float
    dt: float
    initial_kind: str
    grid_n: int | None = None  # None: automatic per viscosity
    snap_every: int = 1
    cfl: float = 0.5
    initial_params: dict = field(default_factory=dict)
    force_kind: str = "none"
    force_params: dict = field(default_factory=dict)
    scales: tuple = (1.0,)
    deltas: tuple = (0.1,)
    u_ref: str = "sweep"
    short_time_eps: float = 0.5
    beta_name: str = "power"
    beta_params: dict = field(default_factory=lambda: {"p": 2.0})
    output_dir: str = "vll_out"
    snapshots: str = "ends"

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("output_dir")
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------

_POW10 = re.compile(r"^10\^\(?(-?\d+(?:\.\d+)?)\)?$")


def _number(text: str) -> float:
    text = text.strip()
    m = _POW10.match(text)
    if m:
        return 10.0 ** float(m.group(1))
    return float(text)


def _number_list(text: str) -> tuple:
    return tuple(_number(t) for t in text.replace(";", ",").split(",") if t.strip())


def _param_string(text: str) -> dict:
    """``"n=8, eps=0.5"`` -> ``{"n": "8", "eps": "0.5"}``."""
    out = {}
    for part in text.replace(";", ",").split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part.strip()!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def auto_grid_n(nu: float, min_scale: float = 1.0, kmax: int = 0) -> int:
    """Smallest ``2^a 5^b`` (``a >= 1``) meeting the resolution policy and ``ell >= 4h``.

    Sizes divisible by three are avoided so the two-thirds dealiasing
    cut never falls on a retained wavenumber.
    """
    need = max(minimal_n(nu), 8 * math.pi / (min_scale * math.sqrt(nu)), 3 * kmax + 1)
    best = None
    p5 = 1
    while p5 <= 4 * need:
        n = 2 * p5
        while n < need:
            n *= 2
        best = n if best is None else min(best, n)
        p5 *= 5
    return int(best)


def parse_config(text: str) -> RunConfig:
    """Parse and validate INI text; raises :class:`ConfigError` listing all problems."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"unparseable configuration: {exc}"]) from None
    errors = []
    for sec in cp.sections():
        if sec not in _SCHEMA:
            errors.append(f"unknown section [{sec}]")
            continue
        for key in cp[sec]:
            if key not in _SCHEMA[sec]:
                errors.append(f"unknown key {sec}.{key}")

    def get(sec, key, conv, default=None, required=False):
        if cp.has_option(sec, key):
            raw = cp.get(sec, key)
            try:
                return conv(raw)
            except (ValueError, TypeError) as exc:
                errors.append(f"{sec}.{key}: cannot parse {raw!r} ({exc})")
                return default
        if required:
            errors.append(f"{sec}.{key} is required")
        return default

    def grid_value(raw):
        raw = raw.strip().lower()
        return None if raw == "auto" else int(raw)

    grid_n = get("grid", "n", grid_value, None)
    nu_list = get("physics", "nu_list", _number_list, (), required=True)
    T = get("time", "t", _number, None, required=True)
    dt = get("time", "dt", _number, None, required=True)
    snap_every = get("time", "snap_every", int, 1)
    cfl = get("time", "cfl", _number, 0.5)
    kind = get("initial", "kind", str.strip, None, required=True)
    init_params = {k: v for k, v in cp["initial"].items() if k != "kind"} if cp.has_section("initial") else {}
    force_kind = get("force", "kind", str.strip, "none")
    force_params = {k: v for k, v in cp["force"].items() if k != "kind"} if cp.has_section("force") else {}
    scales = get("diagnostics", "scales", _number_list, (1.0,))
    deltas = get("diagnostics", "deltas", _number_list, (0.1,))
    u_ref = get("diagnostics", "u_ref", str.strip, "sweep")
    st_eps = get("diagnostics", "short_time_eps", _number, 0.5)
    beta_name = get("beta", "name", str.strip, "power")
    beta_params = {k: v for k, v in cp["beta"].items() if k != "name"} if cp.has_section("beta") else {"p": "2"}
    outdir = get("output", "dir", str.strip, "vll_out")
    snaps = get("output", "snapshots", str.strip, "ends")

    # -- value checks ---------------------------------------------------
    if grid_n is not None and (grid_n < 4 or grid_n % 2):
        errors.append(f"grid.n must be an even integer >= 4 or 'auto' (got {grid_n})")
    for nu in nu_list:
        if not 0 < nu < 1:
            errors.append(f"physics.nu_list: viscosity {nu!r} outside (0, 1)")
    if len(set(nu_list)) != len(nu_list):
        errors.append("physics.nu_list contains duplicates")
    if T is not None and not T > 0:
        errors.append("time.T must be positive")
    if dt is not None and not dt > 0:
        errors.append("time.dt must be positive")
    if T is not None and dt is not None and T > 0 and dt > T:
        errors.append("time.dt exceeds time.T")
    if snap_every is not None and snap_every < 1:
        errors.append("time.snap_every must be >= 1")
    if cfl is not None and not 0 < cfl <= 1:
        errors.append("time.cfl must lie in (0, 1]")
    if scales is not None and (not scales or min(scales) <= 0):
        errors.append("diagnostics.scales must be positive multipliers")
    if deltas is not None and (not deltas or min(deltas) <= 0 or (T is not None and max(deltas) >= T)):
        errors.append("diagnostics.deltas must lie in (0, T)")
    if u_ref not in ("sweep", "zero_ref"):
        errors.append(f"diagnostics.u_ref must be 'sweep' or 'zero_ref' (got {u_ref!r})")
    if snaps not in ("ends", "all", "none"):
        errors.append(f"output.snapshots must be ends|all|none (got {snaps!r})")
    if force_kind not in FORCE_KINDS:
        errors.append(f"force.kind must be one of {', '.join(FORCE_KINDS)} (got {force_kind!r})")
    if force_kind == "gallery" and kind != "gallery":
        errors.append("force.kind = gallery requires initial.kind = gallery")

    init = {}
    if kind is not None:
        if kind not in INITIAL_KINDS:
            errors.append(f"initial.kind must be one of {', '.join(INITIAL_KINDS)} (got {kind!r})")
        else:
            init = _validate_initial(kind, init_params, errors)
    fparams = {}
    for key in ("m", "amplitude"):
        if key in force_params:
            try:
                fparams[key] = _number(force_params[key])
            except ValueError:
                errors.append(f"force.{key}: cannot parse {force_params[key]!r}")
    bparams = {}
    for key, val in beta_params.items():
        try:
            bparams[key] = _number(val)
        except ValueError:
            errors.append(f"beta.{key}: cannot parse {val!r}")
    try:
        beta_from_name(beta_name, **bparams)
    except (ValueError, TypeError, KeyError) as exc:
        errors.append(f"beta: {exc}")

    # -- resolution policy (before any compute) ----------------------------
    if grid_n is not None and not errors:
        for nu in nu_list:
            need = minimal_n(nu)
            if grid_n < need:
                errors.append(f"nu={nu:g}: grid n={grid_n} violates the resolution policy; minimal n is {need}")
        resolvable = [(nu, sc) for nu in nu_list for sc in scales
                      if sc * math.sqrt(nu) >= 4 * 2 * math.pi / grid_n]
        if not resolvable:
            errors.append(f"grid n={grid_n} resolves no diagnostic scale (ell = scale*sqrt(nu) >= 4 spacings)")
        kmax = int(init.get("kmax", 0)) if kind == "random_smooth" else 0
        if kmax and 3 * kmax >= grid_n:
            errors.append(f"initial.kmax={kmax} not below n/3 for n={grid_n}")
    if errors:
        raise ConfigError(errors)
    return RunConfig(
        nu_list=tuple(float(v) for v in nu_list), T=float(T), dt=float(dt), initial_kind=kind, grid_n=grid_n,
        snap_every=int(snap_every), cfl=float(cfl), initial_params=init, force_kind=force_kind,
        force_params=fparams, scales=tuple(scales), deltas=tuple(deltas), u_ref=u_ref,
        short_time_eps=float(st_eps), beta_name=beta_name, beta_params=bparams, output_dir=outdir,
        snapshots=snaps,
    )


_INIT_DEFAULTS = {
    "taylor_green": {},
    "shear": {"k": 1},
    "random_smooth": {"seed": 0, "spectrum_slope": -3.0, "kmax": 8, "amplitude": 0.5},
    "mollified_vortex": {"sign": 1.0, "scale": 1.0, "mass": 1.0},
    "vortex_sheet_approx": {"scale": 1.0, "radius": 1.0, "mass": 1.0},
    "gallery": {"name": None, "params": ""},
}
_INT_KEYS = {"k", "seed", "kmax"}


def _validate_initial(kind: str, raw: dict, errors: list) -> dict:
    defaults = _INIT_DEFAULTS[kind]
    out = dict(defaults)
    for key, val in raw.items():
        if key not in defaults:
            errors.append(f"initial.{key} does not apply to kind {kind}")
            continue
        try:
            if kind == "gallery":
                out[key] = val.strip()
            elif key in _INT_KEYS:
                out[key] = int(val)
            else:
                out[key] = _number(val)
        except ValueError:
            errors.append(f"initial.{key}: cannot parse {val!r}")
    if kind == "shear" and out["k"] < 1:
        errors.append("initial.k must be >= 1")
    if kind == "random_smooth":
        if out["kmax"] < 1:
            errors.append("initial.kmax must be >= 1")
        if not out["amplitude"] > 0:
            errors.append("initial.amplitude must be positive")
    if kind in ("mollified_vortex", "vortex_sheet_approx"):
        if not out["scale"] > 0:
            errors.append("initial.scale must be positive")
        if kind == "mollified_vortex" and out["sign"] not in (1.0, -1.0):
            errors.append("initial.sign must be +1 or -1")
        if kind == "vortex_sheet_approx" and not 0 < out["radius"] < math.pi:
            errors.append("initial.radius must lie in (0, pi)")
    if kind == "gallery":
        if not out["name"]:
            errors.append("initial.name (gallery item) is required")
        elif out["name"] not in gallery.REGISTRY:
            errors.append(f"unknown gallery item {out['name']!r}")
        try:
            out["params"] = _param_string(out["params"])
        except ValueError as exc:
            errors.append(f"initial.params: {exc}")
    return out


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"configuration file not found: {path}"])
    return parse_config(path.read_text())


def grid_for(cfg: RunConfig, nu: float) -> int:
    if cfg.grid_n is not None:
        return cfg.grid_n
    kmax = int(cfg.initial_params.get("kmax", 0)) if cfg.initial_kind == "random_smooth" else 0
    return auto_grid_n(nu, min(cfg.scales), kmax)


# ---------------------------------------------------------------------------
# Initial data and forcing
# ---------------------------------------------------------------------------


def _random_coefficients(seed: int, slope: float, kmax: int):
    """Vorticity Fourier coefficients on ``[-kmax, kmax]^2``, independent of the grid.

    Velocity amplitudes decay like ``|k|^slope`` (vorticity ``|k|^(slope+1)``)
    with seeded uniform phases; the array is made Hermitian so the field
    is real.  Returned with the rms velocity it produces.
    """
    rng = np.random.default_rng(seed)
    ks = np.arange(-kmax, kmax + 1)
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")
    kk = np.hypot(k1, k2)
    phase = rng.uniform(0.0, 2 * np.pi, size=k1.shape)
    with np.errstate(divide="ignore"):
        amp = np.where((kk >= 1) & (kk <= kmax), kk ** (slope + 1.0), 0.0)
    c = amp * np.exp(1j * phase)
    c = 0.5 * (c + np.conj(c[::-1, ::-1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        rms_sq = float(np.sum(np.where(kk > 0, np.abs(c) ** 2 / kk**2, 0.0)))
    return ks, c, math.sqrt(rms_sq)


def _place_coefficients(grid: TorusGrid, ks, c) -> np.ndarray:
    n = grid.n
    spec = np.zeros((n, n), dtype=complex)
    idx = np.mod(ks, n)
    spec[np.ix_(idx, idx)] = c * n * n  # unnormalized forward convention
    return spec


def _mollified_scale(cfg_scale: float, nu: float, grid: TorusGrid) -> float:
    return max(cfg_scale * math.sqrt(nu), 4.0 * grid.spacing)


def initial_vorticity(kind: str, params: dict, grid: TorusGrid, nu: float) -> ScalarField:
    """Mean-zero initial vorticity of the given kind on ``grid``."""
    x1, x2 = grid.mesh()
    if kind == "taylor_green":
        return ScalarField(grid, -2.0 * np.sin(x1) * np.sin(x2), mean_zero=True)
    if kind == "shear":
        k = int(params.get("k", 1))
        return ScalarField(grid, -k * np.cos(k * x2), mean_zero=True)
    if kind == "random_smooth":
        p = {**_INIT_DEFAULTS["random_smooth"], **params}
        ks, c, rms = _random_coefficients(int(p["seed"]), float(p["spectrum_slope"]), int(p["kmax"]))
        if 3 * int(p["kmax"]) >= grid.n:
            raise ValueError("kmax must stay below n/3")
        spec = _place_coefficients(grid, ks, c) * (float(p["amplitude"]) / rms)
        return ScalarField(grid, grid.ifft(spec), mean_zero=True)
    if kind == "mollified_vortex":
        p = {**_INIT_DEFAULTS["mollified_vortex"], **params}
        alpha = _mollified_scale(float(p["scale"]), nu, grid)
        w = np.roll(_bump_weights(grid.n, alpha), (grid.n // 2, grid.n // 2), axis=(0, 1)) / grid.cell_area
        vals = float(p["sign"]) * float(p["mass"]) * (w - 1.0 / grid.area)
        return ScalarField(grid, vals, mean_zero=True)
    if kind == "vortex_sheet_approx":
        p = {**_INIT_DEFAULTS["vortex_sheet_approx"], **params}
        alpha = _mollified_scale(float(p["scale"]), nu, grid)
        k1, k2 = grid.wavevectors
        c = math.pi
        spec = (grid.n**2 / grid.area) * float(p["mass"]) * j0(grid.kmag * float(p["radius"]))
        spec = spec * np.exp(-1j * (k1 + k2) * c) * _bump_symbol(grid.n, alpha)
        spec[0, 0] = 0.0
        return ScalarField(grid, grid.ifft(spec), mean_zero=True)
    if kind == "gallery":
        item = gallery.build(params["name"], **params.get("params", {}))
        w = resample(item.omega, grid)
        return ScalarField(grid, w.values - w.values.mean(), mean_zero=True)
    raise ValueError(f"unknown initial kind {kind!r}")


def initial_decomposition(cfg: RunConfig, grid: TorusGrid, nu: float):
    """``(f0, mu0)`` split for vortex data: ``mu0`` the nonnegative bump, ``f0`` the background."""
    if cfg.initial_kind != "mollified_vortex":
        raise ValueError("decomposition is defined for mollified_vortex data")
    w = initial_vorticity(cfg.initial_kind, cfg.initial_params, grid, nu)
    p = {**_INIT_DEFAULTS["mollified_vortex"], **cfg.initial_params}
    const = -float(p["sign"]) * float(p["mass"]) / grid.area
    f0 = ScalarField(grid, np.full((grid.n, grid.n), const))
    mu0 = ScalarField(grid, w.values - const)
    if p["sign"] < 0:
        f0, mu0 = ScalarField(grid, w.values), ScalarField(grid, np.zeros_like(w.values))
    return f0, mu0


def force_for(cfg: RunConfig, grid: TorusGrid) -> ForceSpec:
    if cfg.force_kind == "none":
        return ForceSpec()
    if cfg.force_kind in ("shear", "cellular"):
        return ForceSpec("steady_analytic", cfg.force_kind, dict(cfg.force_params))
    item = gallery.build(cfg.initial_params["name"], **cfg.initial_params.get("params", {}))
    if item.force is None:
        raise ValueError(f"gallery item {item.name} carries no force")
    return ForceSpec("custom", custom=resample(item.force, grid))


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _evolve_one(cfg: RunConfig, nu: float) -> Trajectory:
    grid = TorusGrid(grid_for(cfg, nu))
    w0 = initial_vorticity(cfg.initial_kind, cfg.initial_params, grid, nu)
    return evolve(w0, nu, cfg.T, cfg.dt, force=force_for(cfg, grid), snap_every=cfg.snap_every, cfl=cfg.cfl)


def _worker_count(jobs: int) -> int:
    env = os.environ.get("VLL_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            cap = 1
    return max(1, min(jobs, cap))


def evolve_all(cfg: RunConfig, workers: int | None = None) -> dict:
    """Evolve every viscosity (one process per viscosity when workers > 1)."""
    nus = list(cfg.nu_list)
    workers = workers or _worker_count(len(nus))
    if workers <= 1:
        return {nu: _evolve_one(cfg, nu) for nu in nus}
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {nu: pool.submit(_evolve_one, cfg, nu) for nu in nus}
        return {nu: futures[nu].result() for nu in nus}


@dataclass
class Report:
    """Outcome of a run or sweep."""

    config_hash: str
    table: DiagnosticTable
    summary: dict
    environment: dict
    outdir: Path | None = None
    trajectories: dict = field(default_factory=dict, repr=False)

    @property
    def constant_free_passed(self) -> bool:
        return all(c.passed for r in self.table.rows for c in r["certificates"] if c.name in CONSTANT_FREE)

    @property
    def exit_code(self) -> int:
        return 0 if self.constant_free_passed else 1


def environment_metadata() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "machine": platform.machine(), "system": platform.system(),
            "vll_threads": os.environ.get("VLL_THREADS", "")}


def _release_fields(traj: Trajectory) -> None:
    for key in [k for k in traj.cache if isinstance(k, tuple) and k and k[0] == "u"]:
        del traj.cache[key]


def _diagnose(cfg: RunConfig, trajs: dict, u_ref_traj: Trajectory | None):
    """Fill the diagnostic table; returns ``(table, kolmogorov reports)``."""
    table = DiagnosticTable()
    reports = {}
    for nu in sorted(trajs, reverse=True):
        tr = trajs[nu]
        unforced = tr.force.is_none
        mono = monotonicity_certificates(tr, SUITE_SLACK, SUITE_SLACK) if unforced else []
        ref = u_ref_traj  # the reference row itself gets lambda_con = 0
        for scale in cfg.scales:
            for delta in cfg.deltas:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    rep = kolmogorov_equivalence_report(tr, delta, scale, u_ref=ref)
                if rep is None:
                    warnings.warn(f"nu={nu:g}, scale={scale:g}: ell under-resolved; row excluded", RuntimeWarning,
                                  stacklevel=2)
                    continue
                reports[(nu, scale, delta)] = rep
                certs = [s2_certificate(tr, rep.ell, delta, SUITE_SLACK)] + mono
                if unforced:
                    certs.append(higher_order_certificate(tr, delta, SUITE_SLACK))
                vals = rep.values
                table.add_row(nu, rep.ell, delta,
                              {"diss_total": vals["diss"], "s2": vals["s2"], "lambda_con": vals["lambda_con"],
                               "omega_con": vals["omega_con"], "q_con": vals["q_con"]}, certs)
        if tr is not u_ref_traj:
            _release_fields(tr)
    return table, reports


def _strictly_decreasing_in_nu(pairs) -> bool:
    """Values listed by decreasing ``nu`` must strictly decrease."""
    vals = [v for _, v in sorted(pairs, key=lambda p: -p[0])]
    return all(b < a for a, b in zip(vals, vals[1:]))


def _sweep_analysis(cfg: RunConfig, trajs: dict, table: DiagnosticTable, reports: dict) -> dict:
    out = {"trends": [], "drift": [], "rate": [], "short_time": [], "notices": []}
    if len(trajs) < 2:
        out["notices"].append("single viscosity: trend tests skipped")
        return out
    for scale in cfg.scales:
        for delta in cfg.deltas:
            rows = [r for r in table.rows if abs(r["ell"] - scale * math.sqrt(r["nu"])) < 1e-12 * max(r["ell"], 1)
                    and r["delta"] == delta]
            if len(rows) < 2:
                out["notices"].append(f"scale={scale:g}, delta={delta:g}: fewer than two resolved rows")
                continue
            trend = {"scale": scale, "delta": delta, "nus": [r["nu"] for r in rows]}
            for col in ("s2", "diss_total", "omega_con", "q_con"):
                trend[f"{col}_strictly_decreasing"] = _strictly_decreasing_in_nu([(r["nu"], r[col]) for r in rows])
            if len(rows) >= 2:
                tau = kendalltau([r["s2"] for r in rows], [r["diss_total"] for r in rows]).statistic
                trend["kendall_tau_s2_diss"] = float(tau)
                trend["co_trend"] = bool(tau > 0)
            out["trends"].append(trend)
            keys = [(nu, scale, delta) for nu in trajs if (nu, scale, delta) in reports]
            names = reports[keys[0]].ratios.keys()
            for name in names:
                d = fit_drift(name, {k[0]: reports[k].ratios[name] for k in keys})
                out["drift"].append({"scale": scale, "delta": delta, **d.record()})
    beta = beta_from_name(cfg.beta_name, **cfg.beta_params)
    for delta in cfg.deltas:
        out["rate"].append(rate_certificate(list(trajs.values()), beta, delta).record())
        try:
            st = short_time_certificate(list(trajs.values()), cfg.short_time_eps, delta)
            out["short_time"].append({"eps": cfg.short_time_eps, "delta": delta, "phi": st["phi"],
                                      "displacement": st["displacement"].record(),
                                      "dissipation": st["dissipation"].record(), "pass": st["passed"]})
        except ValueError as exc:
            out["notices"].append(f"short-time certificate skipped: {exc}")
    return out


def _write_outputs(cfg: RunConfig, outdir: Path, trajs: dict, table: DiagnosticTable, summary: dict,
                   env: dict) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    table.to_csv(outdir / "table.csv")
    for nu, tr in sorted(trajs.items(), reverse=True):
        tag = f"nu={nu!r}"
        tr.ledger.to_csv(outdir / f"ledger_{tag}.csv")
        if cfg.snapshots != "none":
            idx = range(len(tr)) if cfg.snapshots == "all" else sorted({0, len(tr) - 1})
            sdir = outdir / "snapshots"
            sdir.mkdir(exist_ok=True)
            for i in idx:
                write_snapshot(sdir / f"{tag}_i={i:05d}.vll", tr.snapshots[i], nu, float(tr.times[i]))
    (outdir / "certificates.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json) + "\n")
    (outdir / "environment.json").write_text(json.dumps(env, indent=2, sort_keys=True) + "\n")


def _json(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def _summary(cfg: RunConfig, table: DiagnosticTable, trajs: dict) -> dict:
    return {
        "config_hash": cfg.hash,
        "grids": {repr(nu): tr.grid.n for nu, tr in sorted(trajs.items(), reverse=True)},
        "certificates": [
            {"nu": r["nu"], "ell": r["ell"], "delta": r["delta"], **c.record()}
            for r in table.rows for c in r["certificates"]
        ],
        "constant_free_passed": all(c.passed for r in table.rows for c in r["certificates"]
                                    if c.name in CONSTANT_FREE),
    }


def run(cfg: RunConfig, outdir=None, workers: int | None = None, write: bool = True) -> Report:
    """Evolve every viscosity independently and tabulate the diagnostics."""
    trajs = evolve_all(cfg, workers)
    table, _ = _diagnose(cfg, trajs, None)
    summary = _summary(cfg, table, trajs)
    env = environment_metadata()
    out = Path(outdir or cfg.output_dir) if write else None
    if out is not None:
        _write_outputs(cfg, out, trajs, table, summary, env)
    return Report(cfg.hash, table, summary, env, out, trajs)


def sweep(cfg: RunConfig, outdir=None, workers: int | None = None, write: bool = True) -> Report:
    """Run all viscosities, then evaluate co-trends, constant drift and the rate envelope.

    The reference velocity of the defect functional is the smallest-``nu``
    solution unless ``diagnostics.u_ref = zero_ref``.
    """
    trajs = evolve_all(cfg, workers)
    ref = trajs[min(trajs)] if (cfg.u_ref == "sweep" and len(trajs) > 1) else None
    table, reports = _diagnose(cfg, trajs, ref)
    summary = _summary(cfg, table, trajs)
    summary["sweep"] = _sweep_analysis(cfg, trajs, table, reports)
    env = environment_metadata()
    out = Path(outdir or cfg.output_dir) if write else None
    if out is not None:
        _write_outputs(cfg, out, trajs, table, summary, env)
    return Report(cfg.hash, table, summary, env, out, trajs)


# ---------------------------------------------------------------------------
# Snapshot diagnostics and reports
# ---------------------------------------------------------------------------


def diagnose(paths, ell: float, delta: float = 0.0) -> tuple[DiagnosticTable, list]:
    """Diagnostics of a snapshot sequence (one viscosity, increasing times)."""
    snaps = [read_snapshot(p) for p in paths]
    if not snaps:
        raise ValueError("no snapshots given")
    nus = {s.nu for s in snaps}
    grids = {s.omega.grid.n for s in snaps}
    if len(nus) != 1 or len(grids) != 1:
        raise ValueError("snapshots must share one viscosity and one grid")
    snaps.sort(key=lambda s: s.t)
    times = np.array([s.t for s in snaps])
    if np.any(np.diff(times) <= 0):
        raise ValueError("snapshot times must be distinct")
    nu = nus.pop()
    grid = snaps[0].omega.grid
    fields = [ScalarField(grid, s.omega.values - s.omega.values.mean(), mean_zero=True) for s in snaps]
    tr = Trajectory(grid, nu, times, fields)
    from .diagnostics import lambda_con, omega_con, q_con, structure_function, dissipation_total

    values = {"diss_total": dissipation_total(tr, delta) if nu > 0 else 0.0,
              "s2": structure_function(tr, ell, delta), "lambda_con": lambda_con(tr, ell, None, delta),
              "omega_con": omega_con(tr, ell, delta), "q_con": q_con(tr, ell, delta)}
    certs: list[Certificate] = [s2_certificate(tr, ell, delta, SUITE_SLACK)]
    if nu > 0 and len(tr) > 1:
        from .dynamics import monotonicity_checks

        rep = monotonicity_checks(tr)
        from .diagnostics import _certificate

        certs.append(_certificate("l1_monotone", rep.l1_max_ratio, 1.0, SUITE_SLACK))
        if delta > 0:
            certs.append(higher_order_certificate(tr, delta, SUITE_SLACK))
    table = DiagnosticTable()
    table.add_row(nu, ell, delta, values, certs)
    return table, certs


def render_report(path) -> tuple[str, int]:
    """Human-readable pass/fail matrix of ``<dir>/table.csv`` and the exit code.

    Raises ``FileNotFoundError`` for a missing table and ``ValueError`` for
    a corrupted one.
    """
    path = Path(path)
    csv_path = path / "table.csv" if path.is_dir() else path
    if not csv_path.is_file():
        raise FileNotFoundError(f"no diagnostic table at {csv_path}")
    try:
        rows = DiagnosticTable.read_csv(csv_path)
    except (KeyError, ValueError, TypeError) as exc:
        raise ValueError(f"corrupted diagnostic table {csv_path}: {exc}") from None
    if not rows:
        raise ValueError(f"empty diagnostic table {csv_path}")
    names = []
    for r in rows:
        for n in r["certificates"]:
            if n not in names:
                names.append(n)
    lines = ["nu          ell         delta    " + "  ".join(f"{n:>16s}" for n in names)]
    failed_cf = False
    for r in rows:
        cells = []
        for n in names:
            if n in r["certificates"]:
                ok, margin = r["certificates"][n]
                cells.append(f"{('PASS' if ok else 'FAIL'):>5s} {margin:+10.3e}")
                if not ok and n in CONSTANT_FREE:
                    failed_cf = True
            else:
                cells.append(f"{'-':>16s}")
        lines.append(f"{r['nu']:<11.4g} {r['ell']:<11.4g} {r['delta']:<8.3g} " + "  ".join(cells))
    cert_json = csv_path.parent / "certificates.json"
    if cert_json.is_file():
        try:
            summary = json.loads(cert_json.read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"corrupted certificate summary {cert_json}: {exc}") from None
        sw = summary.get("sweep")
        if sw:
            for t in sw.get("trends", []):
                flags = ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in t.items() if k.endswith("decreasing"))
                lines.append(f"trend scale={t['scale']:g} delta={t['delta']:g}: {flags}; "
                             f"kendall tau={t.get('kendall_tau_s2_diss', float('nan')):.3f}")
            for d in sw.get("drift", []):
                lines.append(f"drift {d['name']} (scale={d['scale']:g}, delta={d['delta']:g}): "
                             f"{d['drift']:.3f} {'PASS' if d['pass'] else 'FAIL'}")
            for rr in sw.get("rate", []):
                lines.append(f"rate envelope (beta={rr['beta_name']}, delta={rr['delta']:g}): drift "
                             f"{rr['drift']:.3f} {'PASS' if rr['pass'] else 'FAIL'}")
            for note in sw.get("notices", []):
                lines.append(f"notice: {note}")
    verdict = "FAIL" if failed_cf else "PASS"
    lines.append(f"constant-free certificates: {verdict}")
    return "\n".join(lines), (1 if failed_cf else 0)
