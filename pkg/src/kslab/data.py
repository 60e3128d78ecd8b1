"""Initial-data library: Gaussians, single cosine modes, smoothed stripes.

The stripe profile is the exact heat mollification of the indicator of
``{0 <= x1 <= 1}``, so grid checks against closed forms only have to shift
the evolution time by the smoothing time.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .fields import Grid2D, ScalarField, ifft2


def gaussian_field(
    grid: Grid2D, mass: float = 1.0, width: float = 0.5, center: tuple[float, float] = (0.0, 0.0)
) -> ScalarField:
    """Gaussian bump mass*(4 pi s)^{-1} exp(-|x - x0|^2 / 4s) with s = width."""
    if not width > 0:
        raise ValueError("gaussian width must be positive")
    x1, x2 = grid.coords()
    r2 = (x1 - center[0]) ** 2 + (x2 - center[1]) ** 2
    return ScalarField(grid, mass * np.exp(-r2 / (4.0 * width)) / (4.0 * np.pi * width))


def cosine_mode_field(
    grid: Grid2D, kvec: tuple[int, int] = (1, 0), amplitude: float = 1.0, phase: float = 0.0
) -> ScalarField:
    """amplitude * cos(2 pi (k1 x1 + k2 x2)/l + phase) for integer mode numbers."""
    x1, x2 = grid.coords()
    arg = 2.0 * np.pi * (kvec[0] * x1 + kvec[1] * x2) / grid.l + phase
    return ScalarField(grid, amplitude * np.cos(arg))


def smoothed_stripe_field(grid: Grid2D, smoothing_time: float, amplitude: float = 1.0) -> ScalarField:
    """Heat-mollified indicator of the stripe 0 <= x1 <= 1.

    Equals the heat flow at ``smoothing_time`` applied to the sharp
    indicator: 0.5*(erf(x1/(2 sqrt(s))) - erf((x1-1)/(2 sqrt(s)))).
    """
    if not smoothing_time > 0:
        raise ValueError("smoothing time must be positive")
    w = 2.0 * np.sqrt(smoothing_time)
    x1 = grid.x
    profile = 0.5 * (erf(x1 / w) - erf((x1 - 1.0) / w))
    return ScalarField(grid, amplitude * np.repeat(profile[:, None], grid.n, axis=1))


def point_mass_field(grid: Grid2D, mass: float = 1.0) -> ScalarField:
    """Discrete delta at the origin: mass/h^2 at the centre grid point."""
    values = np.zeros((grid.n, grid.n))
    values[grid.n // 2, grid.n // 2] = mass / grid.cell_area
    return ScalarField(grid, values)


def random_band_limited_field(
    grid: Grid2D, seed: int = 0, max_mode: int = 8, decay: float = 8.0
) -> ScalarField:
    """Seeded random field supported on integer modes |m_i| <= max_mode.

    The underlying function depends only on (seed, max_mode, decay, l), not
    on the resolution, so refinement studies see the same data at every n.
    """
    if max_mode >= grid.n // 2:
        raise ValueError("max_mode must fit strictly inside the grid spectrum")
    rng = np.random.default_rng(seed)
    coeffs = np.zeros((grid.n, grid.n), dtype=np.complex128)
    for m1 in range(-max_mode, max_mode + 1):
        for m2 in range(-max_mode, max_mode + 1):
            re, im = rng.standard_normal(2)
            weight = np.exp(-(m1 * m1 + m2 * m2) / decay)
            coeffs[m1 % grid.n, m2 % grid.n] = weight * (re + 1j * im)
    flipped = np.conj(np.roll(coeffs[::-1, ::-1], 1, axis=(0, 1)))
    coeffs = 0.5 * (coeffs + flipped)
    # ifft2 carries 1/n^2; scale so the function is resolution independent
    return ScalarField(grid, ifft2(coeffs * grid.n**2).real)
