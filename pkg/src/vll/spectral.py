"""Periodic grid, spectral transforms and kernel operations on the 2-torus.

Conventions
-----------
* The torus is ``[0, 2*pi)^2`` sampled at nodes ``x_i = i * h`` with
  ``h = 2*pi / n``.  Arrays are indexed ``values[i, j]`` with ``i`` along
  ``x1`` and ``j`` along ``x2``.
* Forward FFTs are unnormalized; inverse FFTs carry the ``1/n^2`` factor
  (numpy/scipy default).  Quadrature weights are ``h^2`` per node.
* First derivatives use the wavenumbers ``kd`` in which the Nyquist
  wavenumber ``-n/2`` is replaced by zero, so derivatives of real fields
  stay real.  The Laplacian used everywhere is ``-(kd1^2 + kd2^2)``, which
  makes ``curl`` an exact inverse of the Biot-Savart operator on every
  representable mode.
"""

from __future__ import annotations

import functools
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

__all__ = [
    "TorusGrid",
    "ScalarField",
    "VectorField",
    "Mollifier",
    "Snapshot",
    "make_grid",
    "fft_workers",
    "biot_savart",
    "stream_function",
    "curl",
    "perp_grad",
    "laplacian",
    "l1",
    "l2",
    "h1_seminorm",
    "energy",
    "mollify",
    "ball_convolve",
    "disk_area",
    "disk_average_symbol",
    "dealias",
    "dealias_mask",
    "resample",
    "write_snapshot",
    "read_snapshot",
]

SNAPSHOT_MAGIC = b"VLL1"
_HEADER = struct.Struct("<4sIdd")


def fft_workers() -> int:
    """Worker count for FFTs, capped by the ``VLL_THREADS`` environment variable."""
    env = os.environ.get("VLL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return 1


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusGrid:
    """Uniform ``n x n`` grid on the torus ``[0, 2*pi)^2``."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise TypeError("grid size must be an integer")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"grid size must be even and >= 4, got {self.n}")

    @property
    def length(self) -> float:
        return 2.0 * np.pi

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    @property
    def area(self) -> float:
        return (2.0 * np.pi) ** 2

    @functools.cached_property
    def x(self) -> np.ndarray:
        """1D node coordinates."""
        return np.arange(self.n) * self.spacing

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates ``(X1, X2)`` with ``ij`` indexing."""
        return np.meshgrid(self.x, self.x, indexing="ij")

    @functools.cached_property
    def k(self) -> np.ndarray:
        """Integer FFT wavenumbers in numpy order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    @functools.cached_property
    def kd(self) -> np.ndarray:
        """Derivative wavenumbers: ``k`` with the Nyquist entry set to zero."""
        kd = self.k.copy()
        kd[self.n // 2] = 0.0
        return kd

    @functools.cached_property
    def wavevectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Full-spectrum integer wavevectors ``(K1, K2)``."""
        return np.meshgrid(self.k, self.k, indexing="ij")

    @functools.cached_property
    def kmag(self) -> np.ndarray:
        k1, k2 = self.wavevectors
        return np.sqrt(k1**2 + k2**2)

    @functools.cached_property
    def deriv_wavevectors(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.kd, self.kd, indexing="ij")

    @functools.cached_property
    def lap_symbol(self) -> np.ndarray:
        """``|kd|^2`` on the full spectrum (the Laplacian is ``-lap_symbol``)."""
        k1, k2 = self.deriv_wavevectors
        return k1**2 + k2**2

    @functools.cached_property
    def inv_lap_symbol(self) -> np.ndarray:
        """``1/|kd|^2`` with zero on modes that carry no velocity."""
        s = self.lap_symbol
        out = np.zeros_like(s)
        nz = s > 0
        out[nz] = 1.0 / s[nz]
        return out

    @functools.cached_property
    def offsets(self) -> tuple[np.ndarray, np.ndarray]:
        """Minimal-image offsets of every node from the origin."""
        d = np.where(self.x > np.pi, self.x - 2.0 * np.pi, self.x)
        d[self.n // 2] = np.pi  # ambiguous image; |d| is what matters
        return np.meshgrid(d, d, indexing="ij")

    @functools.cached_property
    def offset_radius(self) -> np.ndarray:
        d1, d2 = self.offsets
        return np.hypot(d1, d2)

    def fft(self, values: np.ndarray) -> np.ndarray:
        """Unnormalized forward transform over the last two axes."""
        return sfft.fft2(values, workers=fft_workers())

    def ifft(self, spec: np.ndarray) -> np.ndarray:
        """Inverse transform (with ``1/n^2``), real part."""
        return sfft.ifft2(spec, workers=fft_workers()).real

    def integrate(self, values: np.ndarray) -> float:
        """Node quadrature ``sum(values) * h^2``."""
        return float(np.sum(values) * self.cell_area)

    def parseval(self, spec: np.ndarray) -> float:
        """``int |f|^2`` from an unnormalized full spectrum."""
        return float(np.sum(np.abs(spec) ** 2) * self.area / self.n**4)


def make_grid(n: int) -> TorusGrid:
    """Construct a :class:`TorusGrid` with validation."""
    return TorusGrid(int(n) if isinstance(n, (np.integer,)) else n)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real scalar field sampled on a :class:`TorusGrid`.

    ``mean_zero=True`` asserts ``|mean| <= 1e-12 * max|values|`` at
    construction (used for vorticities).
    """

    grid: TorusGrid
    values: np.ndarray
    mean_zero: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"values shape {v.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)
        if self.mean_zero and not _is_mean_zero(v):
            raise ValueError("field is not mean-zero")

    @functools.cached_property
    def spectrum(self) -> np.ndarray:
        return self.grid.fft(self.values)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def with_values(self, values: np.ndarray, mean_zero: bool = False) -> "ScalarField":
        return ScalarField(self.grid, values, mean_zero=mean_zero)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other))

    def __mul__(self, a):
        return ScalarField(self.grid, self.values * _vals(a))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, mean_zero=self.mean_zero)

    def __abs__(self):
        return ScalarField(self.grid, np.abs(self.values))


@dataclass(frozen=True, eq=False)
class VectorField:
    """Real 2-vector field; ``values`` has shape ``(2, n, n)``."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (2, self.grid.n, self.grid.n):
            raise ValueError(f"values shape {v.shape} does not match (2, {self.grid.n}, {self.grid.n})")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @functools.cached_property
    def spectrum(self) -> np.ndarray:
        return self.grid.fft(self.values)

    @property
    def u1(self) -> np.ndarray:
        return self.values[0]

    @property
    def u2(self) -> np.ndarray:
        return self.values[1]

    def magnitude_sq(self) -> ScalarField:
        return ScalarField(self.grid, self.values[0] ** 2 + self.values[1] ** 2)

    def divergence(self) -> ScalarField:
        k1, k2 = self.grid.deriv_wavevectors
        s = self.spectrum
        return ScalarField(self.grid, self.grid.ifft(1j * k1 * s[0] + 1j * k2 * s[1]))

    def __add__(self, other):
        return VectorField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return VectorField(self.grid, self.values - _vals(other))

    def __mul__(self, a):
        return VectorField(self.grid, self.values * _vals(a))

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.grid, -self.values)


def _vals(x):
    return x.values if isinstance(x, (ScalarField, VectorField)) else x


def _is_mean_zero(v: np.ndarray) -> bool:
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    return abs(float(np.mean(v))) <= 1e-12 * max(scale, 1e-300)


# ---------------------------------------------------------------------------
# Differential operators
# ---------------------------------------------------------------------------


def stream_function(omega: ScalarField) -> ScalarField:
    """Mean-zero solution of ``Laplace(psi) = omega``."""
    _require_mean_zero(omega)
    g = omega.grid
    return ScalarField(g, g.ifft(-omega.spectrum * g.inv_lap_symbol))


def biot_savart(omega: ScalarField) -> VectorField:
    """Velocity ``u = grad_perp Laplace^{-1} omega = (-d2 psi, d1 psi)``.

    The input must be mean-zero.  Modes with ``kd = 0`` (the mean and the
    pure-Nyquist modes) carry no velocity.
    """
    _require_mean_zero(omega)
    g = omega.grid
    k1, k2 = g.deriv_wavevectors
    psi_hat = -omega.spectrum * g.inv_lap_symbol
    u_hat = np.stack([-1j * k2 * psi_hat, 1j * k1 * psi_hat])
    return VectorField(g, g.ifft(u_hat))


def perp_grad(psi: ScalarField) -> VectorField:
    """``grad_perp psi = (-d2 psi, d1 psi)`` computed spectrally."""
    g = psi.grid
    k1, k2 = g.deriv_wavevectors
    s = psi.spectrum
    return VectorField(g, g.ifft(np.stack([-1j * k2 * s, 1j * k1 * s])))


def curl(u: VectorField) -> ScalarField:
    """Scalar curl ``d1 u2 - d2 u1``."""
    g = u.grid
    k1, k2 = g.deriv_wavevectors
    s = u.spectrum
    return ScalarField(g, g.ifft(1j * k1 * s[1] - 1j * k2 * s[0]))


def laplacian(f: ScalarField | VectorField):
    """Spectral Laplacian (symbol ``-|kd|^2``)."""
    g = f.grid
    out = g.ifft(-f.spectrum * g.lap_symbol)
    return VectorField(g, out) if isinstance(f, VectorField) else ScalarField(g, out)


def _require_mean_zero(omega: ScalarField) -> None:
    if not _is_mean_zero(omega.values):
        raise ValueError("vorticity is not mean-zero")


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def l1(f: ScalarField | VectorField) -> float:
    """``L^1`` norm (pointwise Euclidean norm for vector fields)."""
    if isinstance(f, VectorField):
        return f.grid.integrate(np.sqrt(f.values[0] ** 2 + f.values[1] ** 2))
    return f.grid.integrate(np.abs(f.values))


def l2(f: ScalarField | VectorField) -> float:
    """``L^2`` norm."""
    sq = np.sum(f.values**2, axis=0) if isinstance(f, VectorField) else f.values**2
    return float(np.sqrt(f.grid.integrate(sq)))


def h1_seminorm(f: ScalarField | VectorField) -> float:
    """``||grad f||_{L^2}`` computed spectrally (Parseval)."""
    g = f.grid
    w = g.lap_symbol
    s = f.spectrum
    total = np.sum(w * np.abs(s) ** 2)
    return float(np.sqrt(total * g.area / g.n**4))


def energy(u: VectorField) -> float:
    """Kinetic energy ``0.5 * int |u|^2``."""
    return 0.5 * l2(u) ** 2


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mollifier:
    """Radial bump ``exp(-1/(1-|x|^2))`` rescaled to radius ``alpha``."""

    alpha: float
    profile: str = "bump"

    def __post_init__(self):
        if self.profile != "bump":
            raise ValueError(f"unknown mollifier profile {self.profile!r}")
        if not self.alpha > 0:
            raise ValueError("mollifier radius must be positive")

    def weights(self, grid: TorusGrid) -> np.ndarray:
        """Normalized node weights (sum to one) centred at the origin."""
        return _bump_weights(grid.n, float(self.alpha))


def bump(rho: np.ndarray) -> np.ndarray:
    """Unnormalized standard bump ``exp(-1/(1-rho^2))`` for ``rho < 1``."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    inside = rho < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - rho[inside] ** 2))
    return out


@functools.lru_cache(maxsize=32)
def _bump_weights(n: int, alpha: float) -> np.ndarray:
    g = TorusGrid(n)
    w = bump(g.offset_radius / alpha)
    w /= w.sum()
    w.setflags(write=False)
    return w


@functools.lru_cache(maxsize=32)
def _bump_symbol(n: int, alpha: float) -> np.ndarray:
    g = TorusGrid(n)
    s = g.fft(_bump_weights(n, alpha)).real
    s.setflags(write=False)
    return s


@functools.lru_cache(maxsize=64)
def _disk_weights(n: int, r: float) -> np.ndarray:
    g = TorusGrid(n)
    w = (g.offset_radius <= r).astype(float) * g.cell_area
    w.setflags(write=False)
    return w


@functools.lru_cache(maxsize=64)
def _disk_symbol(n: int, r: float) -> np.ndarray:
    g = TorusGrid(n)
    s = g.fft(_disk_weights(n, r)).real
    s.setflags(write=False)
    return s


def disk_area(grid: TorusGrid, r: float) -> float:
    """Area of the sampled disk of radius ``r`` (node count times ``h^2``)."""
    return float(np.sum(_disk_weights(grid.n, float(r))))


def disk_average_symbol(kmag: np.ndarray, r: float) -> np.ndarray:
    """Fourier symbol of the normalized disk average, ``2 J1(|k| r) / (|k| r)``."""
    from scipy.special import j1

    z = np.asarray(kmag, dtype=float) * r
    out = np.ones_like(z)
    nz = z > 0
    out[nz] = 2.0 * j1(z[nz]) / z[nz]
    return out


def _apply_symbol(f, symbol):
    g = f.grid
    out = g.ifft(f.spectrum * symbol)
    if isinstance(f, VectorField):
        return VectorField(g, out)
    return ScalarField(g, out)


def mollify(f: ScalarField | VectorField, alpha: float):
    """Convolve with the normalized bump of radius ``alpha``.

    The kernel is sampled at the grid nodes and normalized to unit discrete
    mass, so constants are preserved exactly and ``L^p`` norms do not grow.
    Raises ``ValueError("under-resolved kernel")`` when ``alpha <= 2h``.
    """
    g = f.grid
    if alpha <= 2.0 * g.spacing:
        raise ValueError(f"under-resolved kernel: alpha={alpha:g} <= 2*spacing={2 * g.spacing:g}")
    if alpha > np.pi:
        raise ValueError("mollifier radius exceeds half the period")
    return _apply_symbol(f, _bump_symbol(g.n, float(alpha)))


def ball_convolve(f: ScalarField | VectorField, r: float):
    """``x -> int_{B_r(x)} f`` for every node ``x``.

    Uses the disk indicator sampled at grid offsets with weight ``h^2``;
    the relative geometric error is at most about ``2h/r``.  Requires
    ``h <= r <= pi``.
    """
    g = f.grid
    if r > np.pi:
        raise ValueError(f"ball radius {r:g} exceeds pi")
    if r < g.spacing:
        raise ValueError(f"ball radius {r:g} below grid spacing {g.spacing:g}")
    return _apply_symbol(f, _disk_symbol(g.n, float(r)))


def dealias_mask(n: int) -> np.ndarray:
    """Boolean mask of full-spectrum modes kept by the 2/3 rule."""
    k = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    return np.maximum(k1, k2) <= n / 3.0


def dealias(spec: np.ndarray) -> np.ndarray:
    """Zero full-spectrum modes with ``max(|k1|, |k2|) > n/3``."""
    spec = np.asarray(spec)
    n = spec.shape[-1]
    if spec.shape[-2] != n:
        raise ValueError("dealias expects a square full spectrum")
    return np.where(dealias_mask(n), spec, 0.0)


def resample(f: ScalarField | VectorField, grid: TorusGrid):
    """Spectral interpolation/truncation onto another grid.

    Modes beyond the smaller grid's band (and both Nyquist lines) are dropped.
    """
    src = f.grid
    if src.n == grid.n:
        return f
    m = min(src.n, grid.n) // 2  # keep |k| < m
    spec = f.spectrum
    out_shape = spec.shape[:-2] + (grid.n, grid.n)
    out = np.zeros(out_shape, dtype=complex)
    idx_src = np.r_[0:m, src.n - m + 1:src.n]
    idx_dst = np.r_[0:m, grid.n - m + 1:grid.n]
    out[..., idx_dst[:, None], idx_dst[None, :]] = spec[..., idx_src[:, None], idx_src[None, :]]
    out *= (grid.n / src.n) ** 2
    vals = grid.ifft(out)
    if isinstance(f, VectorField):
        return VectorField(grid, vals)
    return ScalarField(grid, vals)


# ---------------------------------------------------------------------------
# Snapshot files
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Vorticity snapshot with its viscosity and time stamp."""

    omega: ScalarField
    nu: float
    t: float
    path: Path | None = field(default=None)


def write_snapshot(path, omega: ScalarField, nu: float, t: float) -> Path:
    """Write ``VLL1`` | u32 n | f64 nu | f64 t | n*n f64 (little-endian, row-major)."""
    path = Path(path)
    n = omega.grid.n
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, n, float(nu), float(t)))
        fh.write(np.ascontiguousarray(omega.values, dtype="<f8").tobytes(order="C"))
    return path


def read_snapshot(path) -> Snapshot:
    """Read a snapshot written by :func:`write_snapshot`."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, n, nu, t = _HEADER.unpack_from(raw, 0)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * n * n
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, n).astype(float)
    return Snapshot(ScalarField(TorusGrid(int(n)), vals), float(nu), float(t), path)
