"""Spatial and weighted space-time norms used by the solver and the lab.

Conventions:

* ``sup_{t>0}`` quantities are approximated by maxima over the trajectory's
  time-grid nodes; sup-type report entries carry their argmax time so a
  boundary-attained maximum is visible.
* ``L^2_t`` integrals use the trapezoid rule on the (possibly geometric)
  nodes.  The missing head ``[0, t_min]`` is added in closed form from the
  free evolution of the initial datum when the trajectory carries one, and
  dropped (with a note) otherwise.
* The spatial ``L^inf`` norm is the grid maximum; gradient suprema use the
  Euclidean magnitude of the two components.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .fields import Grid2D, ScalarField, fft2, ifft2
from .trajectories import TimeGrid, Trajectory

BESOV_MIN_DECADES = 6.0


def sigma(t):
    """The half-norm weight sqrt(t/(1+t)): ~ sqrt(t) near 0, -> 1 at infinity."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("sigma is defined for t >= 0")
    out = np.sqrt(t / (1.0 + t))
    return float(out) if out.ndim == 0 else out


def _check_p(p: float) -> float:
    p = float(p)
    if not (p >= 1.0 or np.isinf(p)):
        raise ValueError(f"Lebesgue exponent must be in [1, inf], got {p}")
    return p


def lp_norm(f: ScalarField, p: float) -> float:
    """Discrete L^p norm: (sum |f|^p h^2)^(1/p); grid max for p = inf."""
    p = _check_p(p)
    if np.isinf(p):
        return float(np.max(np.abs(f.values)))
    return float((np.sum(np.abs(f.values) ** p) * f.grid.cell_area) ** (1.0 / p))


def _parseval_factor(grid: Grid2D) -> float:
    return grid.l**2 / grid.n**4


def hs_norm(f: ScalarField, s: float) -> float:
    """Sobolev norm via the spectral weight (1+|xi|^2)^{s/2}; equals L^2 at s=0."""
    c = fft2(f.values)
    w = (1.0 + f.grid.k2) ** s
    return float(np.sqrt(_parseval_factor(f.grid) * np.sum(w * np.abs(c) ** 2)))


def hs_dot_norm(f: ScalarField, s: float) -> float:
    """Homogeneous counterpart with weight |xi|^{2s} (the zero mode drops for s > 0)."""
    c = np.abs(fft2(f.values)) ** 2
    if s == 0:
        w = np.ones_like(f.grid.k2)
    else:
        w = np.zeros_like(f.grid.k2)
        nz = f.grid.k2 > 0
        w[nz] = f.grid.k2[nz] ** s
        if s < 0:
            w[~nz] = 0.0  # convention: the zero mode does not contribute
    return float(np.sqrt(_parseval_factor(f.grid) * np.sum(w * c)))


def grad_linf(f: ScalarField) -> float:
    """Grid maximum of the Euclidean gradient magnitude."""
    c = fft2(f.values)
    g1 = ifft2(1j * f.grid.kx * c).real
    g2 = ifft2(1j * f.grid.ky * c).real
    return float(np.max(np.sqrt(g1**2 + g2**2)))


def trapezoid(times: np.ndarray, values: np.ndarray) -> float:
    gaps = np.diff(times)
    return float(np.sum(0.5 * gaps * (values[1:] + values[:-1])))


# ---------------------------------------------------------------------------
# Besov norms through the heat flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BesovEstimate:
    value: float
    argmax_time: float
    at_boundary: bool


def _weighted_heat_sup(f: ScalarField, probe: TimeGrid, weight_exp: float, p: float, grad: bool) -> BesovEstimate:
    """max over probe times of t^{weight_exp} * ||e^{t Lap} f||-type quantities."""
    grid = f.grid
    coeffs = fft2(f.values)
    times = probe.times
    norms = np.empty(times.size)
    chunk = max(1, (1 << 22) // (grid.n * grid.n))
    for start in range(0, times.size, chunk):
        tt = times[start : start + chunk, None, None]
        hot = np.exp(-tt * grid.k2) * coeffs
        if grad:
            g1 = ifft2(1j * grid.kx * hot).real
            g2 = ifft2(1j * grid.ky * hot).real
            norms[start : start + tt.shape[0]] = np.max(np.sqrt(g1**2 + g2**2), axis=(1, 2))
        else:
            flowed = ifft2(hot).real
            if np.isinf(p):
                norms[start : start + tt.shape[0]] = np.max(np.abs(flowed), axis=(1, 2))
            else:
                norms[start : start + tt.shape[0]] = (
                    np.sum(np.abs(flowed) ** p, axis=(1, 2)) * grid.cell_area
                ) ** (1.0 / p)
    weighted = times**weight_exp * norms
    j = int(np.argmax(weighted))
    at_boundary = j in (0, times.size - 1)
    if at_boundary and weighted[j] > 0:
        warnings.warn(
            f"heat-flow supremum attained at probe boundary t={times[j]:.3g}; "
            "the supremum may not be resolved",
            stacklevel=3,
        )
    return BesovEstimate(float(weighted[j]), float(times[j]), at_boundary)


def besov_norm(f: ScalarField, s: float, p: float, probe: TimeGrid) -> BesovEstimate:
    """Negative-order Besov norm sup_t t^{-s/2} ||e^{t Lap} f||_{L^p}.

    The probe grid must span at least six decades so the supremum has a
    chance to be interior; a boundary-attained maximum raises a warning and
    is flagged in the returned estimate.
    """
    if not s < 0:
        raise ValueError(f"the heat-flow characterisation needs s < 0, got {s}")
    _check_p(p)
    if probe.t_max / probe.t_min < 10.0**BESOV_MIN_DECADES * (1.0 - 1e-12):
        raise ValueError("the probe grid must span at least six decades of time")
    return _weighted_heat_sup(f, probe, -s / 2.0, p, grad=False)


def grad_besov_sup(f: ScalarField, probe: TimeGrid) -> BesovEstimate:
    """sup_t t^{1/2} ||grad e^{t Lap} f||_{L^inf}: the gradient's order -1 norm."""
    if probe.t_max / probe.t_min < 10.0**BESOV_MIN_DECADES * (1.0 - 1e-12):
        raise ValueError("the probe grid must span at least six decades of time")
    return _weighted_heat_sup(f, probe, 0.5, np.inf, grad=True)


def default_besov_probe() -> TimeGrid:
    return TimeGrid.geometric(1e-5, 50.0, 72)


# ---------------------------------------------------------------------------
# Norm reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormEntry:
    value: float
    equation: str
    argmax_time: float | None = None
    note: str | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.value) or self.value < 0:
            raise ValueError(f"norm value must be finite and non-negative, got {self.value}")


@dataclass(frozen=True)
class NormReport:
    entries: dict

    def __getitem__(self, name: str) -> NormEntry:
        return self.entries[name]

    def value(self, name: str) -> float:
        return self.entries[name].value

    def to_json_dict(self) -> dict:
        out = {}
        for name, e in self.entries.items():
            d = {"value": e.value, "equation_tag": e.equation}
            if e.argmax_time is not None:
                d["argmax_time"] = e.argmax_time
            if e.note is not None:
                d["note"] = e.note
            out[name] = d
        return out

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def _batch_lp(stacked: np.ndarray, p: float, cell: float) -> np.ndarray:
    if np.isinf(p):
        return np.max(np.abs(stacked), axis=(1, 2))
    return (np.sum(np.abs(stacked) ** p, axis=(1, 2)) * cell) ** (1.0 / p)


def _batch_grad_linf(traj: Trajectory) -> np.ndarray:
    grid = traj.grid
    c = fft2(traj.stacked)
    g1 = ifft2(1j * grid.kx * c).real
    g2 = ifft2(1j * grid.ky * c).real
    return np.max(np.sqrt(g1**2 + g2**2), axis=(1, 2))


def _sup_entry(times: np.ndarray, values: np.ndarray, equation: str, note: str | None = None) -> NormEntry:
    j = int(np.argmax(values))
    return NormEntry(float(values[j]), equation, argmax_time=float(times[j]), note=note)


def xy_norms_thm1(u: Trajectory, w: Trajectory) -> NormReport:
    """Trajectory norms for the mass/amplitude setting.

    X(u) = sup ||u||_L1 + sup t ||u||_Linf;  Y(w) = sup t^{1/2} ||grad w||_Linf.
    """
    if u.tgrid != w.tgrid:
        raise ValueError("trajectories must share the time grid")
    times = u.tgrid.times
    cell = u.grid.cell_area
    su = u.stacked
    l1 = _batch_lp(su, 1.0, cell)
    linf = _batch_lp(su, np.inf, cell)
    gw = _batch_grad_linf(w)

    e_l1 = _sup_entry(times, l1, "sup_j ||u(t_j)||_L1")
    e_tlinf = _sup_entry(times, times * linf, "sup_j t_j ||u(t_j)||_Linf")
    e_y = _sup_entry(times, np.sqrt(times) * gw, "sup_j t_j^{1/2} ||grad w(t_j)||_Linf")
    x_norm = e_l1.value + e_tlinf.value
    entries = {
        "u_sup_l1": e_l1,
        "u_sup_t_linf": e_tlinf,
        "x_norm": NormEntry(x_norm, "sup ||u||_L1 + sup t ||u||_Linf"),
        "y_norm": e_y,
        "xy_norm": NormEntry(x_norm + e_y.value, "||u||_X + ||w||_Y"),
    }
    return NormReport(entries)


def _h1_weights(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    one_plus = 1.0 + grid.k2
    return one_plus, grid.k2 * one_plus  # H^1 weight, grad-H^1 weight


def _free_head_integral(f0: ScalarField, t1: float, damped: bool) -> float:
    """Closed-form int_0^{t1} ||grad e^{tA} f0||_{H^1}^2 dt for the free flow."""
    grid = f0.grid
    c2 = np.abs(fft2(f0.values)) ** 2
    lam = grid.k2 + (1.0 if damped else 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        time_factor = np.where(lam > 0, -np.expm1(-2.0 * t1 * lam) / (2.0 * lam), t1)
    _, wgrad = _h1_weights(grid)
    return float(_parseval_factor(grid) * np.sum(wgrad * c2 * time_factor))


def _grad_h1_sq_nodes(traj: Trajectory) -> np.ndarray:
    grid = traj.grid
    c2 = np.abs(fft2(traj.stacked)) ** 2
    _, wgrad = _h1_weights(grid)
    return _parseval_factor(grid) * np.sum(wgrad * c2, axis=(1, 2))


def _h1_nodes(traj: Trajectory) -> np.ndarray:
    grid = traj.grid
    c2 = np.abs(fft2(traj.stacked)) ** 2
    wh1, _ = _h1_weights(grid)
    return np.sqrt(_parseval_factor(grid) * np.sum(wh1 * c2, axis=(1, 2)))


def _l2t_grad_h1(traj: Trajectory, damped: bool) -> tuple[float, str]:
    """Trapezoid ||grad .||_{L^2_t H^1} over the nodes plus the [0, t_min] head."""
    sq = _grad_h1_sq_nodes(traj)
    body = trapezoid(traj.tgrid.times, sq)
    if traj.initial is not None:
        head = _free_head_integral(traj.initial, traj.tgrid.t_min, damped)
        note = "head [0, t_min] added in closed form from the initial datum's free flow"
    else:
        head = 0.0
        note = "no initial datum: the [0, t_min] head of the time integral was dropped"
    return float(np.sqrt(body + head)), note


def xy_norms_thm2(u: Trajectory, w: Trajectory) -> NormReport:
    """Trajectory norms for the Sobolev setting.

    X(u) = sup ||u||_H1 + ||grad u||_{L2_t H1} + sup ||u||_Linf;
    Y(w) = sup ||w||_H1 + ||grad w||_{L2_t H1} + sup sigma(t) ||grad w||_Linf.
    """
    if u.tgrid != w.tgrid:
        raise ValueError("trajectories must share the time grid")
    times = u.tgrid.times
    cell = u.grid.cell_area

    e_uh1 = _sup_entry(times, _h1_nodes(u), "sup_j ||u(t_j)||_H1")
    u_grad, u_note = _l2t_grad_h1(u, damped=False)
    e_ugrad = NormEntry(u_grad, "||grad u||_{L2_t H1}", note=u_note)
    e_ulinf = _sup_entry(times, _batch_lp(u.stacked, np.inf, cell), "sup_j ||u(t_j)||_Linf")
    x_norm = e_uh1.value + e_ugrad.value + e_ulinf.value

    e_wh1 = _sup_entry(times, _h1_nodes(w), "sup_j ||w(t_j)||_H1")
    w_grad, w_note = _l2t_grad_h1(w, damped=True)
    e_wgrad = NormEntry(w_grad, "||grad w||_{L2_t H1}", note=w_note)
    e_wsig = _sup_entry(times, sigma(times) * _batch_grad_linf(w), "sup_j sigma(t_j) ||grad w(t_j)||_Linf")
    y_norm = e_wh1.value + e_wgrad.value + e_wsig.value

    entries = {
        "u_sup_h1": e_uh1,
        "u_grad_l2t_h1": e_ugrad,
        "u_sup_linf": e_ulinf,
        "x_norm": NormEntry(x_norm, "sup ||u||_H1 + ||grad u||_{L2_t H1} + sup ||u||_Linf"),
        "w_sup_h1": e_wh1,
        "w_grad_l2t_h1": e_wgrad,
        "w_sigma_grad_linf": e_wsig,
        "y_norm": NormEntry(y_norm, "sup ||w||_H1 + ||grad w||_{L2_t H1} + sup sigma ||grad w||_Linf"),
        "xy_norm": NormEntry(x_norm + y_norm, "||u||_X + ||w||_Y"),
    }
    return NormReport(entries)
