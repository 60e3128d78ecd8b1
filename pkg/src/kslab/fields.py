"""Periodic-torus spectral field core.

Conventions used throughout the package:

* The domain is the square torus ``[-l/2, l/2)^2`` sampled on an ``n x n``
  grid with spacing ``h = l/n``.  ``values[i, j]`` holds the sample at
  ``(x1_i, x2_j)`` with ``x1_i = -l/2 + i*h`` (row index = first coordinate,
  the second coordinate varies fastest in memory).
* Spectral coefficients follow the unnormalised forward FFT:
  ``coeffs[k] = sum_j values[j] * exp(-2*pi*1j*k.j/n)`` and the wavenumber of
  integer index ``k`` is ``xi_k = 2*pi*k/l`` with ``k = -n/2 .. n/2-1`` in
  standard FFT ordering.  Under this normalisation Parseval reads
  ``||f||_{L2}^2 = (l^2/n^4) * sum |coeffs|^2``.
* Products of fields are dealiased with the 2/3 rule: integer modes with
  ``|k| > n//3`` on either axis are zeroed before and after the real-space
  multiplication.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import BinaryIO, Union

import numpy as np
import scipy.fft as _sfft


def worker_count() -> int:
    """Worker cap for FFT calls, taken from the KS_THREADS environment variable."""
    try:
        return max(1, int(os.environ.get("KS_THREADS", "1")))
    except ValueError:
        return 1


def fft2(a: np.ndarray) -> np.ndarray:
    return _sfft.fft2(a, axes=(-2, -1), workers=worker_count())


def ifft2(a: np.ndarray) -> np.ndarray:
    return _sfft.ifft2(a, axes=(-2, -1), workers=worker_count())


def rfft2(a: np.ndarray) -> np.ndarray:
    return _sfft.rfft2(a, axes=(-2, -1), workers=worker_count())


def irfft2(a: np.ndarray, n: int) -> np.ndarray:
    return _sfft.irfft2(a, s=(n, n), axes=(-2, -1), workers=worker_count())


@dataclass(frozen=True)
class Grid2D:
    """Uniform discretisation of the periodic square ``[-l/2, l/2)^2``.

    ``n`` must be a power of two (>= 16) so that dealiasing cutoffs and FFT
    sizes stay exact; ``l`` is the physical side length.  All derived arrays
    (wavenumbers, dealiasing masks, coordinates) are precomputed once.
    """

    n: int
    l: float

    def __post_init__(self) -> None:
        n, l = self.n, float(self.l)
        if n < 16 or (n & (n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 16, got {n}")
        if not l > 0:
            raise ValueError(f"side length must be positive, got {l}")
        object.__setattr__(self, "l", l)
        h = l / n
        object.__setattr__(self, "h", h)

        k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=h)  # (n,) in FFT ordering
        k1h = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)  # (n//2+1,) non-negative
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "kx", k1[:, None])
        object.__setattr__(self, "ky", k1[None, :])
        object.__setattr__(self, "k2", k1[:, None] ** 2 + k1[None, :] ** 2)
        object.__setattr__(self, "ky_half", k1h[None, :])
        object.__setattr__(self, "k2_half", k1[:, None] ** 2 + k1h[None, :] ** 2)

        # 2/3 rule: keep integer modes |m| <= n//3 on each axis.
        m = np.fft.fftfreq(n) * n
        mh = np.fft.rfftfreq(n) * n
        cut = n // 3
        keep = np.abs(m) <= cut
        keep_h = np.abs(mh) <= cut
        object.__setattr__(self, "dealias_mask", keep[:, None] & keep[None, :])
        object.__setattr__(self, "dealias_mask_half", keep[:, None] & keep_h[None, :])

        x = (np.arange(n) - n // 2) * h
        object.__setattr__(self, "x", x)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays ``(x1, x2)`` of shapes (n,1), (1,n)."""
        return self.x[:, None], self.x[None, :]

    @property
    def cell_area(self) -> float:
        return self.h * self.h


def make_grid(n: int, l: float) -> Grid2D:
    return Grid2D(n, l)


@dataclass(frozen=True)
class ScalarField:
    """Real samples of a scalar function on the torus grid.

    Values must be finite; the array is coerced to float64.  Fields behave
    like immutable values and support +, -, and scalar multiplication.
    """

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"field shape {v.shape} does not match grid ({self.grid.n}, {self.grid.n})"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        _require_same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _require_same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def __mul__(self, a: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * float(a))

    __rmul__ = __mul__

    def integral(self) -> float:
        """Trapezoidal (= exact spectral) integral over the torus."""
        return float(self.values.sum() * self.grid.cell_area)

    @classmethod
    def zero(cls, grid: Grid2D) -> "ScalarField":
        return cls(grid, np.zeros((grid.n, grid.n)))


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients of a field, full n x n layout.

    Hermitian symmetry ``coeffs[-k] == conj(coeffs[k])`` holds exactly when
    the represented field is real.
    """

    grid: Grid2D
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"coefficient shape {c.shape} does not match grid ({self.grid.n}, {self.grid.n})"
            )
        object.__setattr__(self, "coeffs", c)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        flipped = np.conj(np.roll(self.coeffs[::-1, ::-1], 1, axis=(0, 1)))
        scale = np.max(np.abs(self.coeffs)) or 1.0
        return bool(np.max(np.abs(self.coeffs - flipped)) <= tol * scale)


def _require_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def to_spectral(f: ScalarField) -> SpectralField:
    """Forward transform; see the module docstring for the normalisation."""
    return SpectralField(f.grid, fft2(f.values))


def from_spectral(F: SpectralField) -> ScalarField:
    """Inverse transform.

    Taking the real part of the inverse FFT is equivalent to Hermitian
    symmetrisation of the coefficients, so the result is always a real field.
    """
    return ScalarField(F.grid, ifft2(F.coeffs).real)


# ---------------------------------------------------------------------------
# Fourier multipliers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Heat:
    """Symbol exp(-t*|xi|^2): the heat flow at time t (modulus <= 1 for t >= 0)."""

    t: float

    def symbol(self, grid: Grid2D) -> np.ndarray:
        return np.exp(-self.t * grid.k2)


@dataclass(frozen=True)
class DampedHeat:
    """Symbol exp(-t) * exp(-t*|xi|^2): heat flow with unit-rate damping."""

    t: float

    def symbol(self, grid: Grid2D) -> np.ndarray:
        # Written as the product so it matches e^{-t} * Heat(t) bit for bit.
        return np.exp(-self.t) * np.exp(-self.t * grid.k2)


@dataclass(frozen=True)
class GradComponent:
    """Symbol 1j*xi_axis: spectral partial derivative along the given axis."""

    axis: int

    def __post_init__(self) -> None:
        if self.axis not in (0, 1):
            raise ValueError(f"axis must be 0 or 1, got {self.axis}")

    def symbol(self, grid: Grid2D) -> np.ndarray:
        k = grid.kx if self.axis == 0 else grid.ky
        return (1j * k) * np.ones((grid.n, grid.n))


@dataclass(frozen=True)
class Laplacian:
    """Symbol -|xi|^2."""

    def symbol(self, grid: Grid2D) -> np.ndarray:
        return -grid.k2


@dataclass(frozen=True)
class FractionalLaplacian:
    """Symbol |xi|^alpha with |0|^alpha = 0; only positive powers are allowed."""

    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(
                f"fractional power must be positive (|xi|^alpha is singular at 0 otherwise), got {self.alpha}"
            )

    def symbol(self, grid: Grid2D) -> np.ndarray:
        return grid.k2 ** (self.alpha / 2.0)


@dataclass(frozen=True)
class Composite:
    """Pointwise product of component symbols."""

    parts: tuple

    def symbol(self, grid: Grid2D) -> np.ndarray:
        sym = np.ones((grid.n, grid.n), dtype=np.complex128)
        for part in self.parts:
            sym = sym * part.symbol(grid)
        return sym


MultiplierSpec = Union[Heat, DampedHeat, GradComponent, Laplacian, FractionalLaplacian, Composite]


def multiplier_apply(m: MultiplierSpec, f: ScalarField) -> ScalarField:
    """Apply a Fourier multiplier: inverse-transform of symbol * coefficients.

    The multiplier must evaluate to finite values on every grid wavenumber.
    The output is made real by Hermitian symmetrisation (real part of the
    inverse transform).
    """
    sym = np.asarray(m.symbol(f.grid))
    if not np.all(np.isfinite(sym)):
        raise ValueError("multiplier evaluates to NaN or infinity on the grid wavenumbers")
    return ScalarField(f.grid, ifft2(sym * fft2(f.values)).real)


def pointwise_product(f: ScalarField, g: ScalarField) -> ScalarField:
    """Dealiased product: 2/3-rule truncation, real-space multiply, truncate again."""
    _require_same_grid(f, g)
    mask = f.grid.dealias_mask
    fd = ifft2(mask * fft2(f.values)).real
    gd = ifft2(mask * fft2(g.values)).real
    return ScalarField(f.grid, ifft2(mask * fft2(fd * gd)).real)


def gradient(f: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Spectral gradient (i*xi multipliers)."""
    c = fft2(f.values)
    g1 = ifft2(1j * f.grid.kx * c).real
    g2 = ifft2(1j * f.grid.ky * c).real
    return ScalarField(f.grid, g1), ScalarField(f.grid, g2)


def divergence(g1: ScalarField, g2: ScalarField) -> ScalarField:
    """Spectral divergence; divergence(gradient(f)) equals the Laplacian symbol exactly."""
    _require_same_grid(g1, g2)
    grid = g1.grid
    c = 1j * grid.kx * fft2(g1.values) + 1j * grid.ky * fft2(g2.values)
    return ScalarField(grid, ifft2(c).real)


# ---------------------------------------------------------------------------
# KSF1 snapshot files
# ---------------------------------------------------------------------------

KSF1_MAGIC = b"KSF1"
_KSF1_HEADER = struct.Struct("<4sIdd")  # magic, n (u32), l (f64), t (f64)


def write_snapshot(fh: BinaryIO, field: ScalarField, t: float) -> None:
    """Write one KSF1 snapshot: magic, n, l, t, then n*n float64 row-major."""
    fh.write(_KSF1_HEADER.pack(KSF1_MAGIC, field.grid.n, field.grid.l, float(t)))
    fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_snapshot(fh: BinaryIO) -> tuple[ScalarField, float]:
    """Read one KSF1 snapshot; raises ValueError on bad magic or truncation."""
    header = fh.read(_KSF1_HEADER.size)
    if len(header) != _KSF1_HEADER.size:
        raise ValueError("truncated KSF1 header")
    magic, n, l, t = _KSF1_HEADER.unpack(header)
    if magic != KSF1_MAGIC:
        raise ValueError(f"bad KSF1 magic: {magic!r}")
    raw = fh.read(8 * n * n)
    if len(raw) != 8 * n * n:
        raise ValueError("truncated KSF1 payload")
    values = np.frombuffer(raw, dtype="<f8").reshape(n, n).copy()
    return ScalarField(Grid2D(int(n), float(l)), values), float(t)


def save_field(path, field: ScalarField, t: float = 0.0) -> None:
    with open(path, "wb") as fh:
        write_snapshot(fh, field, t)


def load_field(path) -> tuple[ScalarField, float]:
    with open(path, "rb") as fh:
        return read_snapshot(fh)
