"""Numerical verification of the standalone operator estimates.

Each ``verify_*`` function evaluates both sides of an estimate on declared
sample families and reports the observed ratios; ``estimate_constants``
turns the linear/bilinear ratios into the empirical constant that feeds the
solver's smallness threshold.  ``counterexample_profile`` evaluates the
stripe-data lower bound that rules out smallness for arbitrary bounded data.

Discrete conventions: time norms on both sides of an estimate use the same
trapezoid rule on the shared node set (suprema become node maxima), so a
ratio of 1 means the discrete inequality is tight, not a quadrature
artefact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .data import (
    cosine_mode_field,
    gaussian_field,
    random_band_limited_field,
    smoothed_stripe_field,
)
from .duhamel import DEFAULT_SCHEME, bilinear_B, etd_convolve, linear_L, maximal_reg_T
from .fields import GradComponent, Grid2D, ScalarField, fft2, multiplier_apply
from .norms import (
    _batch_lp,
    _parseval_factor,
    hs_norm,
    lp_norm,
    trapezoid,
    xy_norms_thm1,
    xy_norms_thm2,
)
from .semigroup import damped_heat_trajectory, heat, heat_trajectory
from .trajectories import TimeGrid, Trajectory


@dataclass(frozen=True)
class LabSetup:
    """Grid/time window for a verification run; ``doubled`` refines all three.

    ``mode_cap`` pins the largest swept integer mode; the doubled setup
    inherits it so refinement studies compare the same sample family.
    """

    n: int = 64
    l: float = 32.0
    t_min: float = 1e-3
    t_max: float = 10.0
    num_times: int = 32
    mode_cap: int | None = None

    def make_grid(self) -> Grid2D:
        return Grid2D(self.n, self.l)

    def make_timegrid(self) -> TimeGrid:
        return TimeGrid.geometric(self.t_min, self.t_max, self.num_times)

    def effective_mode_cap(self) -> int:
        return self.mode_cap if self.mode_cap is not None else self.n // 3

    def doubled(self) -> "LabSetup":
        return LabSetup(
            self.n * 2, self.l, self.t_min, self.t_max * 2, self.num_times * 2,
            mode_cap=self.effective_mode_cap(),
        )


@dataclass(frozen=True)
class RatioSample:
    family: str
    params: tuple
    lhs: float
    rhs: float
    ratio: float


@dataclass(frozen=True)
class InequalityReport:
    name: str
    samples: tuple[RatioSample, ...]
    metadata: dict

    @property
    def max_ratio(self) -> float:
        return max(s.ratio for s in self.samples)

    def group_max(self) -> dict:
        out: dict = {}
        for s in self.samples:
            out[s.family] = max(out.get(s.family, 0.0), s.ratio)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["family", "params", "lhs", "rhs", "ratio"])
            for s in self.samples:
                writer.writerow([s.family, json.dumps(s.params), repr(s.lhs), repr(s.rhs), repr(s.ratio)])

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "max_ratio": self.max_ratio,
            "group_max": self.group_max(),
            "metadata": self.metadata,
        }


def _time_lp(times: np.ndarray, values: np.ndarray, p: float, v0: float | None = None) -> float:
    """Discrete L^p norm in time over [0, T]: node trapezoid, optional t=0 knot."""
    if np.isinf(p):
        sup = float(np.max(values))
        return max(sup, v0) if v0 is not None else sup
    body = trapezoid(times, values**p)
    if v0 is not None:
        body += 0.5 * times[0] * (v0**p + values[0] ** p)
    return float(body ** (1.0 / p))


def _hs_nodes(grid: Grid2D, coeffs: np.ndarray, s: float, homogeneous: bool) -> np.ndarray:
    """Sobolev norms per node from batched spectral coefficients (K, n, n)."""
    if homogeneous:
        if s == 0:
            w = np.ones_like(grid.k2)
        else:
            w = np.where(grid.k2 > 0, grid.k2, 1.0) ** s
            w[grid.k2 == 0] = 0.0
    else:
        w = (1.0 + grid.k2) ** s
    return np.sqrt(_parseval_factor(grid) * np.sum(w * np.abs(coeffs) ** 2, axis=(-2, -1)))


_SWEEP_MODES = (1, 2, 3, 4, 6, 8, 12, 16)


def _lab_fields(grid: Grid2D, seed: int) -> list[tuple[str, ScalarField]]:
    return [
        ("const", ScalarField(grid, np.ones((grid.n, grid.n)))),
        ("gaussian", gaussian_field(grid, mass=1.0, width=1.0)),
        ("mode31", cosine_mode_field(grid, (3, 1))),
        ("random", random_band_limited_field(grid, seed=seed, max_mode=8)),
    ]


# ---------------------------------------------------------------------------
# Multiplier estimates
# ---------------------------------------------------------------------------


def verify_multiplier_lemma(setup: LabSetup = LabSetup(), seed: int = 0) -> InequalityReport:
    """Both forms of the multiplier estimate on heat-type symbol families.

    Form A:  ||m(t,D) v||_{L^r_t H^s} <= ||m||_{L^r_t L^inf_xi} ||v||_{H^s}
    Form B:  ||m_d(t,D) v||_{L^rho_t H^s} <= ||m_d||_{L^inf_xi L^rho_t} ||v||_{H^s}
    with m in {1, heat, damped heat} and m_d = |xi|^delta * m.
    """
    grid = setup.make_grid()
    tgrid = setup.make_timegrid()
    times = tgrid.times
    k2 = grid.k2

    syms = {
        "identity": np.ones((times.size,) + k2.shape),
        "heat": np.exp(-times[:, None, None] * k2),
        "damped": np.exp(-times[:, None, None]) * np.exp(-times[:, None, None] * k2),
    }
    fields = _lab_fields(grid, seed)
    samples: list[RatioSample] = []

    for fname, f in fields:
        vhat = fft2(f.values)
        for mname, sym in syms.items():
            applied = sym * vhat
            for s in (0.0, 1.0):
                hs_f = _hs_nodes(grid, vhat[None], s, homogeneous=False)[0]
                lhs_nodes = _hs_nodes(grid, applied, s, homogeneous=False)
                sup_xi = np.max(np.abs(sym), axis=(1, 2))
                for r in (np.inf, 2.0):
                    lhs = _time_lp(times, lhs_nodes, r)
                    rhs = _time_lp(times, sup_xi, r) * hs_f
                    if rhs == 0:
                        continue
                    samples.append(
                        RatioSample(
                            f"formA[r={'inf' if np.isinf(r) else int(r)},s={int(s)}]",
                            (("multiplier", mname), ("field", fname)),
                            lhs, rhs, lhs / rhs,
                        )
                    )
                # Form B with |xi|^delta weights, rho = 2
                for delta in (0.0, 1.0):
                    msym = sym * np.sqrt(k2)[None] ** delta if delta else sym
                    per_xi = np.sqrt(
                        np.maximum(trapezoid_axis(times, np.abs(msym) ** 2), 0.0)
                    )
                    rhs = float(np.max(per_xi)) * hs_f
                    lhs_nodes_b = _hs_nodes(grid, msym * vhat, s, homogeneous=False)
                    lhs = _time_lp(times, lhs_nodes_b, 2.0)
                    if rhs == 0:
                        continue
                    samples.append(
                        RatioSample(
                            f"formB[rho=2,delta={int(delta)},s={int(s)}]",
                            (("multiplier", mname), ("field", fname)),
                            lhs, rhs, lhs / rhs,
                        )
                    )

    meta = {"n": setup.n, "K": setup.num_times, "T": setup.t_max, "seed": seed}
    return InequalityReport("multiplier_lemma", tuple(samples), meta)


def trapezoid_axis(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Trapezoid along axis 0 for (K, ...) arrays."""
    gaps = np.diff(times).reshape((-1,) + (1,) * (values.ndim - 1))
    return np.sum(0.5 * gaps * (values[1:] + values[:-1]), axis=0)


# ---------------------------------------------------------------------------
# Time-convolution (bilinear-term) estimates
# ---------------------------------------------------------------------------

_EQ27_TUPLES = ((0.0, np.inf, np.inf), (1.0, 2.0, 2.0), (0.0, 2.0, 2.0), (1.0, np.inf, np.inf))
_EQ26_TUPLES = ((np.inf, 2.0), (np.inf, np.inf), (2.0, 2.0))


def _profile_trajectory(grid: Grid2D, tgrid: TimeGrid, f: ScalarField, profile) -> Trajectory:
    vals = profile(tgrid.times)[:, None, None] * f.values[None]
    return Trajectory.from_values(grid, tgrid, vals, initial=float(profile(0.0)) * f)


def _fmt(x: float) -> str:
    return "inf" if np.isinf(x) else f"{x:g}"


def verify_bilinear_lemma23(setup: LabSetup = LabSetup(), seed: int = 0) -> InequalityReport:
    """Convolution-in-time estimates against heat and damped-heat kernels.

    Damped form: || int_0^t e^{-(t-tau)(1+|xi|^2)} |xi|^theta F dtau ||_{L^p1_t Hdot^s}
                 <= C ||F||_{L^r_t Hdot^s}  on the tuples used downstream.
    Plain form:  the |xi|^{2+2/p-2/r} variant measured in inhomogeneous H^s.
    The metadata records a mode-sweep uniformity gap: enlarging the swept
    mode set must not materially raise the observed constant.
    """
    grid = setup.make_grid()
    tgrid = setup.make_timegrid()
    times = tgrid.times
    k2 = grid.k2

    profiles = {"const": lambda t: np.ones_like(np.asarray(t, dtype=float)), "decay": lambda t: np.exp(-np.asarray(t, dtype=float))}
    modes = [m for m in _SWEEP_MODES if m <= setup.effective_mode_cap()]
    field_samples: list[tuple[str, tuple, ScalarField]] = [
        (f"mode{m}", (("mode", m),), cosine_mode_field(grid, (m, 0))) for m in modes
    ]
    field_samples.append(("random", (("seed", seed),), random_band_limited_field(grid, seed=seed, max_mode=8)))

    samples: list[RatioSample] = []
    uniformity: dict = {}

    def run_case(group: str, lam: np.ndarray, pre: np.ndarray, p_out: float, r_in: float,
                 s: float, homogeneous: bool) -> None:
        for fname, fparams, f in field_samples:
            for pname, prof in profiles.items():
                traj = _profile_trajectory(grid, tgrid, f, prof)
                out = etd_convolve(traj, lam, prefactor=pre, scheme=DEFAULT_SCHEME)
                lhs_nodes = _hs_nodes(grid, fft2(out.stacked), s, homogeneous)
                lhs = _time_lp(times, lhs_nodes, p_out, v0=0.0)
                f_norm = _hs_nodes(grid, fft2(f.values)[None], s, homogeneous)[0]
                rhs_nodes = prof(times) * f_norm
                rhs = _time_lp(times, rhs_nodes, r_in, v0=float(prof(0.0)) * f_norm)
                if rhs == 0:
                    continue
                samples.append(
                    RatioSample(group, fparams + (("field", fname), ("profile", pname)), lhs, rhs, lhs / rhs)
                )

    for theta, p1, r in _EQ27_TUPLES:
        pre = np.sqrt(k2) ** theta if theta else np.ones_like(k2)
        for s in (0.0, 1.0):
            run_case(
                f"damped[theta={_fmt(theta)},p1={_fmt(p1)},r={_fmt(r)},s={int(s)}]",
                1.0 + k2, pre, p1, r, s, homogeneous=True,
            )

    for p, r in _EQ26_TUPLES:
        power = 2.0 + (0.0 if np.isinf(p) else 2.0 / p) - 2.0 / r
        pre = np.sqrt(k2) ** power
        for s in (0.0, 1.0):
            run_case(
                f"plain[p={_fmt(p)},r={_fmt(r)},s={int(s)}]",
                k2, pre, p, r, s, homogeneous=False,
            )

    # Uniformity sweep: per tuple, compare max ratio over low modes with the
    # max over the full swept range (constant-profile, s = 0).
    sweep_modes = list(range(1, setup.effective_mode_cap() + 1))
    for label, lam, pre_fn, p_out, r_in, homog in (
        ("damped[theta=0,p1=inf,r=inf,s=0]", 1.0 + k2, lambda: np.ones_like(k2), np.inf, np.inf, True),
        ("plain[p=inf,r=inf,s=0]", k2, lambda: np.sqrt(k2) ** 2.0, np.inf, np.inf, False),
    ):
        ratios = []
        for m in sweep_modes:
            f = cosine_mode_field(grid, (m, 0))
            traj = _profile_trajectory(grid, tgrid, f, profiles["const"])
            out = etd_convolve(traj, lam, prefactor=pre_fn(), scheme=DEFAULT_SCHEME)
            lhs = _time_lp(times, _hs_nodes(grid, fft2(out.stacked), 0.0, homog), p_out, v0=0.0)
            f_norm = _hs_nodes(grid, fft2(f.values)[None], 0.0, homog)[0]
            ratios.append(lhs / f_norm)
        ratios = np.array(ratios)
        low = float(np.max(ratios[: max(1, len(sweep_modes) // 2)]))
        full = float(np.max(ratios))
        uniformity[label] = {"low_modes_max": low, "full_sweep_max": full,
                             "gap": abs(full - low) / full if full > 0 else 0.0}

    meta = {"n": setup.n, "K": setup.num_times, "T": setup.t_max, "seed": seed,
            "uniformity": uniformity}
    return InequalityReport("bilinear_convolution", tuple(samples), meta)


# ---------------------------------------------------------------------------
# Maximal regularity
# ---------------------------------------------------------------------------


def verify_maximal_regularity(setup: LabSetup = LabSetup(), seed: int = 0) -> InequalityReport:
    """||T g||_{L2_t L2} / ||g||_{L2_t L2} over modes and time profiles.

    The input norm integrates the piecewise-linear reconstruction of g
    exactly; the output norm uses the node trapezoid.
    """
    grid = setup.make_grid()
    tgrid = setup.make_timegrid()
    times = tgrid.times
    modes = [m for m in _SWEEP_MODES if m <= setup.effective_mode_cap()]

    def square_profile(t):
        # on/off wave with absolute period 1, so refinement sees the same g
        t = np.asarray(t, dtype=float)
        return (np.floor(2.0 * t) % 2 == 0).astype(float)

    profiles = {
        "const": lambda t: np.ones_like(np.asarray(t, dtype=float)),
        "decay": lambda t: np.exp(-np.asarray(t, dtype=float)),
        "square": square_profile,
    }

    samples: list[RatioSample] = []
    for m in modes:
        f = cosine_mode_field(grid, (m, 0))
        f_l2 = lp_norm(f, 2.0)
        for pname, prof in profiles.items():
            traj = _profile_trajectory(grid, tgrid, f, prof)
            out = maximal_reg_T(traj, DEFAULT_SCHEME)
            lhs_nodes = _batch_lp(out.stacked, 2.0, grid.cell_area)
            lhs = _time_lp(times, lhs_nodes, 2.0, v0=0.0)
            knots = np.concatenate(([0.0], times))
            pv = np.concatenate(([float(prof(0.0))], prof(times)))
            gaps = np.diff(knots)
            rhs_sq = np.sum(gaps * (pv[:-1] ** 2 + pv[:-1] * pv[1:] + pv[1:] ** 2) / 3.0)
            rhs = f_l2 * float(np.sqrt(rhs_sq))
            if rhs == 0:
                continue
            samples.append(
                RatioSample("maxreg[p=q=2]", (("mode", m), ("profile", pname)), lhs, rhs, lhs / rhs)
            )

    by_subset = {
        "all": max(s.ratio for s in samples),
        "low_modes": max(s.ratio for s in samples if dict(s.params)["mode"] <= max(1, setup.effective_mode_cap() // 2)),
        "const_only": max(s.ratio for s in samples if dict(s.params)["profile"] == "const"),
    }
    meta = {"n": setup.n, "K": setup.num_times, "T": setup.t_max, "seed": seed, "subsets": by_subset}
    return InequalityReport("maximal_regularity", tuple(samples), meta)


def verify_l4_interpolation(setup: LabSetup = LabSetup(), seed: int = 0) -> InequalityReport:
    """Space-time interpolation ||f||_{L4_t L4}^2 <= c ||f||_{Linf_t L2} ||grad f||_{L2_t H1}.

    Checked on free heat evolutions of the sample fields; the observed ratio
    is recorded, only finiteness is asserted downstream.
    """
    grid = setup.make_grid()
    tgrid = setup.make_timegrid()
    times = tgrid.times
    samples: list[RatioSample] = []
    from .norms import _l2t_grad_h1

    for fname, f in _lab_fields(grid, seed):
        traj = heat_trajectory(f, tgrid)
        l4 = _batch_lp(traj.stacked, 4.0, grid.cell_area)
        lhs = float(np.sqrt(trapezoid(times, l4**4) + times[0] * lp_norm(f, 4.0) ** 4))
        sup_l2 = max(float(np.max(_batch_lp(traj.stacked, 2.0, grid.cell_area))), lp_norm(f, 2.0))
        grad_l2t, _ = _l2t_grad_h1(traj, damped=False)
        rhs = sup_l2 * grad_l2t
        if rhs == 0:
            continue
        samples.append(RatioSample("l4_interpolation", (("field", fname),), lhs, rhs, lhs / rhs))
    meta = {"n": setup.n, "K": setup.num_times, "T": setup.t_max, "seed": seed}
    return InequalityReport("l4_interpolation", tuple(samples), meta)


def besov_equivalence_samples(setup: LabSetup = LabSetup(), seed: int = 0) -> InequalityReport:
    """Measured ratio of the order-0 sup norm to the gradient's order -1 norm.

    sup_t ||e^{t Lap} v||_Linf versus sup_t t^{1/2} ||grad e^{t Lap} v||_Linf;
    the equivalence constants are recorded, not certified.
    """
    grid = setup.make_grid()
    probe = TimeGrid.geometric(setup.t_max * 1e-6 / 1.1, setup.t_max, 48)
    from .fields import ifft2
    from .norms import grad_besov_sup

    samples: list[RatioSample] = []
    for fname, f in _lab_fields(grid, seed):
        coeffs = fft2(f.values)
        sup0 = 0.0
        for t in probe.times:
            flowed = ifft2(np.exp(-t * grid.k2) * coeffs).real
            sup0 = max(sup0, float(np.max(np.abs(flowed))))
        import warnings as _warnings

        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            grad_est = grad_besov_sup(f, probe)
        if grad_est.value == 0:
            continue
        samples.append(
            RatioSample("besov_equivalence", (("field", fname),), sup0, grad_est.value,
                        sup0 / grad_est.value)
        )
    meta = {"n": setup.n, "probe_T": setup.t_max, "seed": seed}
    return InequalityReport("besov_equivalence", tuple(samples), meta)


def refinement_drift(verifier, setup: LabSetup = LabSetup(), seed: int = 0) -> dict:
    """Per-family observed-constant drift under simultaneous (n, K, T) doubling."""
    base = verifier(setup, seed=seed)
    fine = verifier(setup.doubled(), seed=seed)
    g1, g2 = base.group_max(), fine.group_max()
    per_group = {
        key: abs(g2[key] - g1[key]) / g1[key]
        for key in g1
        if key in g2 and g1[key] > 0
    }
    return {
        "per_group": per_group,
        "max_drift": max(per_group.values()) if per_group else 0.0,
        "base": g1,
        "fine": g2,
    }


# ---------------------------------------------------------------------------
# Empirical constants and the smallness threshold
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantsReport:
    c1: float
    c2: float
    c3: float
    safety_factor: float
    c: float
    threshold: float
    samples: tuple[RatioSample, ...]
    metadata: dict

    @property
    def observed_max(self) -> float:
        return max(self.c1, self.c2, self.c3)

    def to_json_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "safety_factor": self.safety_factor,
            "c": self.c,
            "threshold": self.threshold,
            "metadata": self.metadata,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    def to_csv(self, path) -> None:
        InequalityReport("constants", self.samples, {}).to_csv(path)


def standard_families(grid: Grid2D) -> list[tuple[str, ScalarField]]:
    """Gaussians, single modes, and a fixed-width stripe, spanning scales/positions."""
    quarter = grid.l / 8.0
    return [
        ("gauss_narrow", gaussian_field(grid, 1.0, 0.25)),
        ("gauss_wide", gaussian_field(grid, 1.0, 1.0)),
        ("gauss_offset", gaussian_field(grid, 1.0, 0.5, center=(quarter, -quarter / 2.0))),
        ("mode10", cosine_mode_field(grid, (1, 0))),
        ("mode21", cosine_mode_field(grid, (2, 1))),
        ("stripe", smoothed_stripe_field(grid, smoothing_time=0.01)),
    ]


def estimate_constants(
    setup: LabSetup = LabSetup(),
    families: list[tuple[str, ScalarField]] | None = None,
    safety_factor: float = 1.5,
) -> ConstantsReport:
    """Observed-ratio maxima for the linear/bilinear estimates, both norm modes.

    c1: free-evolution bounds; c2: bilinear bound; c3: chemical-response
    bound.  The working constant is the observed maximum inflated by the
    safety factor, and the smallness threshold is 3/(32 c^2).
    """
    grid = setup.make_grid()
    tgrid = setup.make_timegrid()
    if families is None:
        families = standard_families(grid)

    samples: list[RatioSample] = []
    skipped: list[str] = []

    free_u: list[tuple[str, Trajectory, dict]] = []
    free_w: list[tuple[str, Trajectory, dict]] = []
    for name, f in families:
        traj_u = heat_trajectory(f, tgrid)
        traj_w = damped_heat_trajectory(f, tgrid)
        norms_u1 = xy_norms_thm1(traj_u, traj_u)
        norms_w1 = xy_norms_thm1(traj_w, traj_w)
        norms_u2 = xy_norms_thm2(traj_u, traj_u)
        norms_w2 = xy_norms_thm2(traj_w, traj_w)
        free_u.append((name, traj_u, {"x1": norms_u1.value("x_norm"), "x2": norms_u2.value("x_norm")}))
        free_w.append((name, traj_w, {"y1": norms_w1.value("y_norm"), "y2": norms_w2.value("y_norm")}))

        l1 = lp_norm(f, 1.0)
        linf = lp_norm(f, np.inf)
        h1 = hs_norm(f, 1.0)
        h1b = h1 + linf
        if l1 > 0:
            samples.append(RatioSample("c1[free_u_mass]", (("data", name),),
                                       norms_u1.value("x_norm"), l1, norms_u1.value("x_norm") / l1))
        else:
            skipped.append(f"{name}: zero L1 norm")
        if linf > 0:
            samples.append(RatioSample("c1[free_w_grad]", (("data", name),),
                                       norms_w1.value("y_norm"), linf, norms_w1.value("y_norm") / linf))
        if h1b > 0:
            samples.append(RatioSample("c1[free_u_sobolev]", (("data", name),),
                                       norms_u2.value("x_norm"), h1b, norms_u2.value("x_norm") / h1b))
        if h1 > 0:
            h1_part = norms_w2.value("w_sup_h1") + norms_w2.value("w_grad_l2t_h1")
            samples.append(RatioSample("c1[free_w_sobolev]", (("data", name),),
                                       h1_part, h1, h1_part / h1))
            sig_part = norms_w2.value("w_sigma_grad_linf")
            samples.append(RatioSample("c1[free_w_sigma]", (("data", name),),
                                       sig_part, h1, sig_part / h1))

    for uname, utraj, unorm in free_u:
        # c3: chemical response of the density trajectory
        lu = linear_L(utraj, DEFAULT_SCHEME)
        y1 = xy_norms_thm1(lu, lu).value("y_norm")
        y2 = xy_norms_thm2(lu, lu).value("y_norm")
        if unorm["x1"] > 0:
            samples.append(RatioSample("c3[thm1]", (("u", uname),), y1, unorm["x1"], y1 / unorm["x1"]))
        if unorm["x2"] > 0:
            samples.append(RatioSample("c3[thm2]", (("u", uname),), y2, unorm["x2"], y2 / unorm["x2"]))
        for wname, wtraj, wnorm in free_w:
            b = bilinear_B(utraj, wtraj, DEFAULT_SCHEME)
            bx1 = xy_norms_thm1(b, b).value("x_norm")
            bx2 = xy_norms_thm2(b, b).value("x_norm")
            if unorm["x1"] * wnorm["y1"] > 0:
                samples.append(RatioSample("c2[thm1]", (("u", uname), ("w", wname)),
                                           bx1, unorm["x1"] * wnorm["y1"],
                                           bx1 / (unorm["x1"] * wnorm["y1"])))
            if unorm["x2"] * wnorm["y2"] > 0:
                samples.append(RatioSample("c2[thm2]", (("u", uname), ("w", wname)),
                                           bx2, unorm["x2"] * wnorm["y2"],
                                           bx2 / (unorm["x2"] * wnorm["y2"])))

    c1 = max(s.ratio for s in samples if s.family.startswith("c1"))
    c2 = max(s.ratio for s in samples if s.family.startswith("c2"))
    c3 = max(s.ratio for s in samples if s.family.startswith("c3"))
    c = safety_factor * max(c1, c2, c3)
    meta = {
        "n": setup.n, "l": setup.l, "K": setup.num_times,
        "t_min": setup.t_min, "T": setup.t_max,
        "families": [name for name, _ in families],
        "skipped": skipped,
    }
    return ConstantsReport(
        c1=c1, c2=c2, c3=c3, safety_factor=safety_factor, c=c,
        threshold=3.0 / (32.0 * c * c), samples=tuple(samples), metadata=meta,
    )


@lru_cache(maxsize=1)
def default_constants() -> ConstantsReport:
    """The bundled deterministic constants run used when no c is configured."""
    return estimate_constants(LabSetup())


# ---------------------------------------------------------------------------
# Stripe-data counterexample profile
# ---------------------------------------------------------------------------

COUNTEREXAMPLE_T_MAX = 1.0 / 64.0


def stripe_lower_constant() -> float:
    """(e^-1 - e^-9) / (2 sqrt(pi)): the lower bound inside the window."""
    return float((np.exp(-1.0) - np.exp(-9.0)) / (2.0 * np.sqrt(np.pi)))


def stripe_profile_exact(t: float, x1) -> np.ndarray:
    """Closed form of t^{1/2} |d_1 e^{t Lap} 1_{0<=x1<=1}| on the line."""
    x1 = np.asarray(x1, dtype=np.float64)
    return np.abs(np.exp(-(x1**2) / (4.0 * t)) - np.exp(-((x1 - 1.0) ** 2) / (4.0 * t))) / (
        2.0 * np.sqrt(np.pi)
    )


@dataclass(frozen=True)
class CounterexampleResult:
    t: float
    x1: np.ndarray
    closed_form: np.ndarray
    c0: float
    in_window: bool
    verdict: str
    grid_x1: np.ndarray | None = None
    grid_values: np.ndarray | None = None
    smoothed_reference: np.ndarray | None = None
    max_rel_gap: float | None = None


def default_counterexample_grid() -> Grid2D:
    return Grid2D(512, 8.0)


def counterexample_profile(
    t: float,
    x1_points,
    grid: Grid2D | None = None,
    smoothing_cells: float = 1.0,
) -> CounterexampleResult:
    """Evaluate the stripe gradient profile at (t, x1) points.

    The verdict uses the closed form: "holds" when every value meets the
    lower constant inside the window 0 < t < 1/64, sqrt(t) < x1 < 2 sqrt(t);
    points outside the window give "outside hypothesis".  When a grid is
    supplied the same profile is recomputed through the grid heat flow on a
    one-cell-smoothed stripe and cross-validated against the closed form at
    the smoothing-shifted time.
    """
    x1 = np.atleast_1d(np.asarray(x1_points, dtype=np.float64))
    c0 = stripe_lower_constant()
    rt = np.sqrt(t) if t > 0 else 0.0
    in_window = bool(
        0.0 < t < COUNTEREXAMPLE_T_MAX and np.all((x1 > rt) & (x1 < 2.0 * rt))
    )
    closed = stripe_profile_exact(t, x1) if t > 0 else np.zeros_like(x1)
    if not in_window:
        verdict = "outside hypothesis"
    elif np.all(closed >= c0):
        verdict = "holds"
    else:
        verdict = "violated"

    grid_x1 = grid_vals = reference = None
    max_rel_gap = None
    if grid is not None and t > 0:
        s_m = (smoothing_cells * grid.h / 2.0) ** 2
        v0 = smoothed_stripe_field(grid, smoothing_time=s_m)
        d1 = multiplier_apply(GradComponent(0), heat(t, v0))
        idx = np.clip(np.round((x1 + grid.l / 2.0) / grid.h).astype(int), 0, grid.n - 1)
        grid_x1 = grid.x[idx]
        grid_vals = np.sqrt(t) * np.abs(d1.values[idx, 0])
        reference = stripe_profile_exact(t + s_m, grid_x1)
        max_rel_gap = float(np.max(np.abs(grid_vals - reference) / reference))

    return CounterexampleResult(
        t=float(t), x1=x1, closed_form=closed, c0=c0, in_window=in_window,
        verdict=verdict, grid_x1=grid_x1, grid_values=grid_vals,
        smoothed_reference=reference, max_rel_gap=max_rel_gap,
    )


@dataclass(frozen=True)
class CounterexampleSweep:
    results: tuple[CounterexampleResult, ...]
    c0: float
    all_hold: bool
    point_count: int
    max_rel_gap: float | None
    normalized_lower_bound: float
    smoothing_width: float = 0.0  # stripe mollification width in length units

    def to_json_dict(self) -> dict:
        return {
            "c0": self.c0,
            "all_hold": self.all_hold,
            "point_count": self.point_count,
            "max_rel_gap": self.max_rel_gap,
            "normalized_lower_bound": self.normalized_lower_bound,
            "smoothing_width": self.smoothing_width,
            "points": [
                {
                    "t": r.t,
                    "x1": r.x1.tolist(),
                    "closed_form": r.closed_form.tolist(),
                    "verdict": r.verdict,
                    "grid_values": None if r.grid_values is None else r.grid_values.tolist(),
                    "max_rel_gap": r.max_rel_gap,
                }
                for r in self.results
            ],
        }


def counterexample_sweep(
    grid: Grid2D | None = None,
    num_t: int = 5,
    smoothing_cells: float = 1.0,
) -> CounterexampleSweep:
    """A (t, x1) sweep inside the hypothesis window, two grid-aligned x1 per t."""
    if grid is None:
        grid = default_counterexample_grid()
    ts = np.linspace(0.004, 0.0145, num_t)
    results = []
    min_value = np.inf
    max_gap = 0.0
    count = 0
    for t in ts:
        rt = np.sqrt(t)
        lo, hi = 1.05 * rt, 1.95 * rt
        cols = grid.x[(grid.x > lo) & (grid.x < hi)]
        if cols.size < 2:
            raise ValueError("counterexample grid too coarse for the sweep window")
        x1 = np.array([cols[0], cols[-1]])
        res = counterexample_profile(t, x1, grid=grid, smoothing_cells=smoothing_cells)
        results.append(res)
        min_value = min(min_value, float(np.min(res.closed_form)))
        if res.max_rel_gap is not None:
            max_gap = max(max_gap, res.max_rel_gap)
        count += x1.size
    c0 = stripe_lower_constant()
    all_hold = all(r.verdict == "holds" for r in results)
    return CounterexampleSweep(
        results=tuple(results), c0=c0, all_hold=all_hold, point_count=count,
        max_rel_gap=max_gap, normalized_lower_bound=min_value / c0,
        smoothing_width=smoothing_cells * grid.h,
    )
