"""Regularization-parameter sweeps: the vanishing-eps limit, measured.

A sweep runs the same scenario on a strictly decreasing ladder of eps
values, holding grid, step size and raw initial data fixed (the initial
data is re-mollified per rung), and then measures what the limit theory
predicts qualitatively:

  * Cauchy differences of consecutive trajectories in L^2(0,T;V) for u
    and L^2(0,T;V') for u_t should shrink rung to rung;
  * every a-priori monitor should stay bounded along the ladder;
  * the space-time pairing of the regularized nonlinearity against u
    approaches the value that the weak form forces on the limit, with a
    one-signed gap;
  * the L^1(Omega) time profile of the nonlinearity may concentrate in
    time while its space-time mass stays bounded, summarized by the
    peak-to-mean concentration index.

The dual element that the limit produces is never materialized; the finest
rung's regularized nonlinearity stands in for it in every pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import (
    EnergyLedger,
    EstimateReport,
    RunRecord,
    SimConfig,
    StepFailure,
    monitor,
    simulate,
)
from .spectral import SpectralField, eigenvalues

_trapz = getattr(np, "trapezoid", np.trapz)

DEFAULT_EPS_LADDER = (1e-1, 5e-2, 2.5e-2, 1.25e-2)


@dataclass(frozen=True)
class SweepPlan:
    """A ladder of runs differing only in eps."""

    base_config: SimConfig  # its eps field is ignored rung by rung
    u0: SpectralField
    u1: SpectralField
    eps_ladder: tuple[float, ...] = DEFAULT_EPS_LADDER
    stored_fields: int = 1  # stride for full space-time field storage
    regularize_data: bool = True  # per-rung mollification of the initial data

    def __post_init__(self):
        lad = tuple(float(e) for e in self.eps_ladder)
        if len(lad) < 3:
            raise ValueError("eps ladder needs at least 3 rungs")
        if any(not (0.0 < e < 1.0) for e in lad):
            raise ValueError("every eps must lie in (0, 1)")
        if any(b >= a for a, b in zip(lad, lad[1:])):
            raise ValueError("eps ladder must be strictly decreasing")
        if self.stored_fields < 1:
            raise ValueError("stored_fields stride must be >= 1")
        object.__setattr__(self, "eps_ladder", lad)

    def rung_config(self, eps: float, joint_refine: bool = False) -> SimConfig:
        """Config for one rung; joint refinement scales dt with eps."""
        if joint_refine:
            dt = self.base_config.dt * eps / self.eps_ladder[0]
            return replace(self.base_config, eps=eps, dt=dt)
        return replace(self.base_config, eps=eps)


@dataclass
class SweepReport:
    eps_ladder: tuple[float, ...]
    complete: bool
    failed_eps: float | None
    cauchy_L2V_of_u: list[float]  # consecutive-rung differences, len = rungs-1
    cauchy_L2Vprime_of_ut: list[float]
    duality_pairing: list[float]  # per-rung space-time pairing of beta_eps(u) with u
    eta_time_profile: list[np.ndarray]  # per-rung ||beta_eps(u)(t)||_{L^1}
    profile_times: list[np.ndarray]
    concentration_index: list[float]
    l1l1_mass: list[float]
    energy_snapshots: list[list[EnergyLedger]]  # per rung, at the sample times
    snapshot_times: list[float]
    monitors: list[EstimateReport]
    rung_records: list[RunRecord]


def _common_times(ta: np.ndarray, tb: np.ndarray, tol: float):
    """Indices of (sorted) times shared by two trajectories, within tol."""
    ia, ib = [], []
    j = 0
    for i, t in enumerate(ta):
        while j < tb.size and tb[j] < t - tol:
            j += 1
        if j < tb.size and abs(tb[j] - t) <= tol:
            ia.append(i)
            ib.append(j)
            j += 1
    return ia, ib


def _cauchy_difference(a: RunRecord, b: RunRecord, which: str, power: float) -> float:
    """L^2(0,T;*) norm of the difference of two stored trajectories.

    which picks the stored component ("u" or "v"); power the eigenvalue
    weight of the spatial norm (1 for V, -1 for V').  Trajectories are
    aligned on their common stored times (all of them when the rungs share
    dt; the coarse subset under joint refinement).
    """
    tol = 1e-9 * max(1.0, a.cfg.T)
    ia, ib = _common_times(a.stored_times, b.stored_times, tol)
    if len(ia) < 2:
        raise ValueError("rungs share fewer than two stored times")
    mu = eigenvalues(a.cfg.grid) ** power
    fa = a.stored_u if which == "u" else a.stored_v
    fb = b.stored_u if which == "u" else b.stored_v
    t = a.stored_times[ia]
    sq = np.empty(len(ia))
    for k, (i, j) in enumerate(zip(ia, ib)):
        d = fa[i] - fb[j]
        sq[k] = float(np.sum(mu * d * d))
    return math.sqrt(float(_trapz(sq, t)))


def duality_pairing_value(record: RunRecord) -> float:
    """Right-endpoint time integral of (beta_eps(u), u)_H over the run.

    This is the quadrature under which the scheme satisfies the discrete
    weak-form identity exactly, so the same rung's identity value matches
    it to the Newton tolerance.
    """
    dt_w = np.diff(record.t)
    return float(np.sum(dt_w * record.pair_beta_u[1:]))


def weak_form_identity_value(record: RunRecord) -> float:
    """The pairing value forced by the discrete weak form on a trajectory.

    Summation by parts of the scheme paired against u gives

        -alpha (v(T), u(T))_* + alpha (v(0), u(0))_*
        + alpha sum dt (v^{n-1}, v^n)_*  - sum dt (v^n, u^n)_*
        - delta sum dt (v^n, u^n)_H - sum dt ||u^n||_V^2
        + lam sum dt ||u^n||_H^2

    with all sums over steps n >= 1.  Evaluated on the finest rung this is
    the computable stand-in for the limit pairing.
    """
    cfg = record.cfg
    dt_w = np.diff(record.t)
    s = lambda col: float(np.sum(dt_w * col[1:]))
    return (
        -cfg.alpha * record.star_v_u[-1]
        + cfg.alpha * record.star_v_u[0]
        + cfg.alpha * s(record.star_vprev_v)
        - s(record.star_v_u)
        - cfg.delta * s(record.h_v_u)
        - s(record.norm_V_u**2)
        + cfg.lam * s(record.norm_H_u**2)
    )


def run_sweep(plan: SweepPlan, joint_refine: bool = False) -> SweepReport:
    """Execute every rung and assemble the convergence/concentration report."""
    records: list[RunRecord] = []
    failed_eps = None
    for eps in plan.eps_ladder:
        cfg = plan.rung_config(eps, joint_refine)
        try:
            rec = simulate(
                cfg,
                plan.u0.copy(),
                plan.u1.copy(),
                field_stride=plan.stored_fields,
                regularize=plan.regularize_data,
            )
        except StepFailure:
            failed_eps = eps
            break
        records.append(rec)

    complete = failed_eps is None
    cauchy_u: list[float] = []
    cauchy_ut: list[float] = []
    for a, b in zip(records, records[1:]):
        cauchy_u.append(_cauchy_difference(a, b, "u", 1.0))
        cauchy_ut.append(_cauchy_difference(a, b, "v", -1.0))

    pairings = [duality_pairing_value(r) for r in records]
    profiles = [r.beta_l1 for r in records]
    times = [r.t for r in records]

    conc: list[float] = []
    mass: list[float] = []
    for r in records:
        b = r.beta_l1
        total = float(_trapz(b, r.t))
        mass.append(float(np.sum(np.diff(r.t) * b[1:])))
        T = r.cfg.T
        conc.append(float(np.max(b)) * T / total if total > 0.0 else 1.0)

    snapshot_times: list[float] = []
    snapshots: list[list[EnergyLedger]] = []
    if records:
        T = records[0].cfg.T
        snapshot_times = [0.0, 0.25 * T, 0.5 * T, 0.75 * T, T]
        for r in records:
            row = []
            for ts in snapshot_times:
                i = int(np.argmin(np.abs(r.t - ts)))
                row.append(
                    EnergyLedger(
                        kinetic=float(r.kinetic[i]),
                        dirichlet=float(r.dirichlet[i]),
                        potential=float(r.potential[i]),
                        concave=float(r.concave[i]),
                        total=float(r.total[i]),
                        inequality_residual=float(r.ineq_residual[i]),
                    )
                )
            snapshots.append(row)

    return SweepReport(
        eps_ladder=plan.eps_ladder[: len(records)],
        complete=complete,
        failed_eps=failed_eps,
        cauchy_L2V_of_u=cauchy_u,
        cauchy_L2Vprime_of_ut=cauchy_ut,
        duality_pairing=pairings,
        eta_time_profile=profiles,
        profile_times=times,
        concentration_index=conc,
        l1l1_mass=mass,
        energy_snapshots=snapshots,
        snapshot_times=snapshot_times,
        monitors=[monitor(r) for r in records],
        rung_records=records,
    )


@dataclass(frozen=True)
class DualityVerdict:
    passed: bool
    gaps: tuple[float, ...]
    reference: float  # weak-form identity value at the finest rung
    tol: float

    def __bool__(self) -> bool:
        return self.passed


def duality_limsup_check(report: SweepReport, rel_tol: float = 1e-3) -> DualityVerdict:
    """Check the one-sided pairing inequality against the finest-rung proxy.

    The gap at rung i is pairing_i minus the weak-form identity value of
    the finest trajectory.  Pass requires (a) the finest gap at most
    rel_tol * |reference| (the one-sided direction the limit theory
    asserts) and (b) the gap magnitude not growing across the two finest
    rungs.  Gaps typically rise to zero from below, so the monotonicity is
    on |gap|, the size of the disagreement.
    """
    if not report.complete:
        raise ValueError("sweep is incomplete; refusing the duality check")
    if len(report.rung_records) < 2:
        raise ValueError("duality check needs at least two rungs")
    reference = weak_form_identity_value(report.rung_records[-1])
    gaps = tuple(p - reference for p in report.duality_pairing)
    tol = rel_tol * abs(reference) if reference != 0.0 else rel_tol
    passed = gaps[-1] <= tol and abs(gaps[-1]) <= abs(gaps[-2]) + tol
    return DualityVerdict(passed=passed, gaps=gaps, reference=reference, tol=tol)


def loglog_slope(eps_values, magnitudes) -> float:
    """Least-squares slope of log(magnitude) against log(eps).

    Zero magnitudes make the monitor trivially bounded and give slope 0.
    """
    x = np.log(np.asarray(eps_values, dtype=float))
    y = np.asarray(magnitudes, dtype=float)
    if np.any(y <= 0.0):
        return 0.0
    return float(np.polyfit(x, np.log(y), 1)[0])


def monitor_slopes(report: SweepReport) -> dict[str, float]:
    """log-log slope of each a-priori monitor along the eps ladder."""
    eps = report.eps_ladder
    out = {}
    for name in report.monitors[0].as_dict():
        vals = [m.as_dict()[name] for m in report.monitors]
        out[name] = loglog_slope(eps, vals)
    return out
