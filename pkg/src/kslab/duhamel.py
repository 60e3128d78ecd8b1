"""Time-convolution operators against the heat and damped-heat flows.

All operators share one exponential-time-differencing core: per Fourier mode
the factor ``exp(-(t - tau) * lam)`` is integrated exactly over each time
interval against a piecewise-constant or piecewise-linear reconstruction of
the integrand, and the running integral is marched from node to node (the
semigroup factorises exactly, so marching equals the full sum per mode).

The apparently singular kernels of the underlying estimates stay benign
here: the differentiation sits inside the exactly integrated multiplier.

Interval handling near t = 0: when the input trajectories carry an initial
datum, the integrand is known at t = 0 and the head ``[0, t_1]`` is one more
ETD interval; otherwise the head is dropped and its size is estimated in the
output's ``meta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, fft2, ifft2
from .trajectories import Trajectory

_KINDS = ("etd_piecewise_constant", "etd_piecewise_linear")


class TrajectoryOverflowError(RuntimeError):
    """An integral-operator output overflowed; carries the first bad node."""

    def __init__(self, node_index: int):
        self.node_index = node_index
        super().__init__(f"integral-operator output is non-finite at node {node_index}")


def _finite_trajectory_values(values: np.ndarray) -> np.ndarray:
    bad = ~np.isfinite(values)
    if bad.any():
        raise TrajectoryOverflowError(int(np.argwhere(bad.any(axis=(1, 2)))[0][0]))
    return values


@dataclass(frozen=True)
class QuadratureScheme:
    kind: str = "etd_piecewise_linear"
    substeps: int = 1

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


DEFAULT_SCHEME = QuadratureScheme()

# Entire-function weights for the exact per-interval integrals, z = lam * dt:
#   phi1(z)    = (1 - e^-z)/z                      (piecewise-constant weight)
#   w_left(z)  = (phi1(z) - e^-z)/z                (linear weight, left value)
#   w_right(z) = (1 - phi1(z))/z                   (linear weight, right value)
# Small z uses the Taylor series to avoid catastrophic cancellation.
_SERIES_CUT = 0.5
_NTERMS = 14
_WL_COEFFS = np.array(
    [(-1.0) ** j * (j + 1) / math.factorial(j + 2) for j in range(_NTERMS)]
)
_WR_COEFFS = np.array([(-1.0) ** j / math.factorial(j + 2) for j in range(_NTERMS)])


def _phi1(z: np.ndarray) -> np.ndarray:
    out = np.ones_like(z)
    nz = z > 0
    out[nz] = -np.expm1(-z[nz]) / z[nz]
    return out


def _poly(z: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    out = np.full_like(z, coeffs[-1])
    for c in coeffs[-2::-1]:
        out = out * z + c
    return out


def _w_left(z: np.ndarray) -> np.ndarray:
    small = z < _SERIES_CUT
    out = np.empty_like(z)
    out[small] = _poly(z[small], _WL_COEFFS)
    zl = z[~small]
    out[~small] = (-np.expm1(-zl) / zl - np.exp(-zl)) / zl
    return out


def _w_right(z: np.ndarray) -> np.ndarray:
    small = z < _SERIES_CUT
    out = np.empty_like(z)
    out[small] = _poly(z[small], _WR_COEFFS)
    zl = z[~small]
    out[~small] = (1.0 + np.expm1(-zl) / zl) / zl
    return out


def _etd_march(
    ghat: np.ndarray,
    times: np.ndarray,
    lam: np.ndarray,
    g0hat: np.ndarray | None,
    scheme: QuadratureScheme,
) -> tuple[np.ndarray, dict]:
    """March int_0^{t_j} e^{-(t_j-tau) lam} g(tau) dtau over all output nodes."""
    n_out = times.size
    pcw_linear = scheme.kind == "etd_piecewise_linear"
    meta: dict = {}

    if g0hat is not None:
        knot_t = np.concatenate(([0.0], times))
        knot_g = np.concatenate((g0hat[None], ghat), axis=0)
        out_offset = 1
        meta["head_included"] = True
    else:
        knot_t = times
        knot_g = ghat
        out_offset = 0
        meta["head_included"] = False
        deficit = times[0] * _phi1(lam * times[0]) * ghat[0]
        meta["head_deficit_sup_linf"] = float(np.max(np.abs(ifft2(deficit).real)))

    spline = None
    if scheme.substeps > 1:
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(knot_t, knot_g, axis=0)

    acc = np.zeros_like(lam, dtype=np.complex128)
    out = np.empty((n_out,) + lam.shape, dtype=np.complex128)
    if out_offset == 0:
        out[0] = acc  # the [0, t_1] contribution was dropped

    for i in range(knot_t.size - 1):
        a, b = knot_t[i], knot_t[i + 1]
        if scheme.substeps == 1:
            edges = (a, b)
            vals = (knot_g[i], knot_g[i + 1])
        else:
            edges = np.linspace(a, b, scheme.substeps + 1)
            vals = [knot_g[i]]
            vals.extend(spline(tt) for tt in edges[1:-1])
            vals.append(knot_g[i + 1])
        for k in range(len(edges) - 1):
            dt = edges[k + 1] - edges[k]
            z = lam * dt
            decay = np.exp(-z)
            if pcw_linear:
                acc = acc * decay + dt * (_w_left(z) * vals[k] + _w_right(z) * vals[k + 1])
            else:
                acc = acc * decay + dt * _phi1(z) * vals[k]
        j = i + 1 - out_offset
        if j >= 0:
            out[j] = acc
    return out, meta


def _require_compatible(a: Trajectory, b: Trajectory) -> None:
    if a.grid != b.grid:
        raise ValueError("trajectories live on different grids")
    if a.tgrid != b.tgrid:
        raise ValueError("trajectories live on different time grids")


def _div_u_grad_v(grid, uhat: np.ndarray, vhat: np.ndarray) -> np.ndarray:
    """Spectral div(u grad v) with 2/3-rule dealiasing, batched over axis 0."""
    mask = grid.dealias_mask
    u_r = ifft2(mask * uhat).real
    d1 = ifft2(mask * (1j * grid.kx * vhat)).real
    d2 = ifft2(mask * (1j * grid.ky * vhat)).real
    p1 = fft2(u_r * d1)
    p2 = fft2(u_r * d2)
    return mask * (1j * grid.kx * p1 + 1j * grid.ky * p2)


def bilinear_B(u: Trajectory, v: Trajectory, scheme: QuadratureScheme = DEFAULT_SCHEME) -> Trajectory:
    """int_0^t e^{(t-tau) Lap} div(u grad v) dtau on the shared time grid.

    The divergence structure kills the zero mode of the integrand exactly, so
    the output has zero spatial mean at every node.
    """
    _require_compatible(u, v)
    grid = u.grid
    ghat = _div_u_grad_v(grid, fft2(u.stacked), fft2(v.stacked))
    g0hat = None
    if u.initial is not None and v.initial is not None:
        g0hat = _div_u_grad_v(grid, fft2(u.initial.values), fft2(v.initial.values))
    out_hat, meta = _etd_march(ghat, u.tgrid.times, grid.k2, g0hat, scheme)
    values = _finite_trajectory_values(ifft2(out_hat).real)
    return Trajectory.from_values(grid, u.tgrid, values, initial=ScalarField.zero(grid), meta=meta)


def linear_L(u: Trajectory, scheme: QuadratureScheme = DEFAULT_SCHEME, damped: bool = True) -> Trajectory:
    """int_0^t e^{(t-tau)(Lap - 1)} u dtau; ``damped=False`` drops the -1."""
    grid = u.grid
    lam = grid.k2 + (1.0 if damped else 0.0)
    ghat = fft2(u.stacked)
    g0hat = None if u.initial is None else fft2(u.initial.values)
    out_hat, meta = _etd_march(ghat, u.tgrid.times, lam, g0hat, scheme)
    values = _finite_trajectory_values(ifft2(out_hat).real)
    return Trajectory.from_values(grid, u.tgrid, values, initial=ScalarField.zero(grid), meta=meta)


def maximal_reg_T(g: Trajectory, scheme: QuadratureScheme = DEFAULT_SCHEME) -> Trajectory:
    """int_0^t e^{(t-tau) Lap} Lap g dtau: the maximal-regularity operator."""
    grid = g.grid
    ghat = (-grid.k2) * fft2(g.stacked)
    g0hat = None if g.initial is None else (-grid.k2) * fft2(g.initial.values)
    out_hat, meta = _etd_march(ghat, g.tgrid.times, grid.k2, g0hat, scheme)
    values = _finite_trajectory_values(ifft2(out_hat).real)
    return Trajectory.from_values(grid, g.tgrid, values, initial=ScalarField.zero(grid), meta=meta)


def etd_convolve(
    g: Trajectory,
    lam: np.ndarray,
    prefactor: np.ndarray | None = None,
    scheme: QuadratureScheme = DEFAULT_SCHEME,
) -> Trajectory:
    """General form int_0^t e^{-(t-tau) lam(xi)} prefactor(xi) g(tau) dtau.

    ``lam`` must be non-negative on the grid; ``prefactor`` is any finite
    time-independent symbol (for example a fractional-Laplacian power).
    """
    grid = g.grid
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (grid.n, grid.n))
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("decay rates must be finite and non-negative")
    ghat = fft2(g.stacked)
    g0hat = None if g.initial is None else fft2(g.initial.values)
    if prefactor is not None:
        prefactor = np.asarray(prefactor)
        if not np.all(np.isfinite(prefactor)):
            raise ValueError("prefactor symbol must be finite on the grid")
        ghat = prefactor * ghat
        if g0hat is not None:
            g0hat = prefactor * g0hat
    out_hat, meta = _etd_march(ghat, g.tgrid.times, lam, g0hat, scheme)
    values = _finite_trajectory_values(ifft2(out_hat).real)
    return Trajectory.from_values(grid, g.tgrid, values, initial=ScalarField.zero(grid), meta=meta)
