"""Turn run histories into verdicts: blow-up sets, limits, bounds, orders.

The classifier separates three observable behaviours at the tracked offsets
from the peak: geometric divergence (the peak itself, growth ratio tending
to 1+tau), sustained non-saturating growth (the neighbours in the p = 2,
q = 1 regime, which diverge roughly linearly in the step count), and
saturation (bounded nodes, whose increments vanish geometrically).  All
verdicts are relative to the finite stopping threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from enum import Enum

import numpy as np

from cwblowup.grid import interval_count_for
from cwblowup.params import InitialData, SimParams
from cwblowup.simulator import RunHistory, RunOutcome, RunStatus, run

# Classifier thresholds (see classify_blowup_set): chosen so the classes
# cannot overlap on one run.
_GEOMETRIC_RATIO_MARGIN = 0.5      # per-step ratio must exceed 1 + margin*tau
_BOUNDED_DRIFT = 0.01              # relative drift below this means saturated
_TREND_DRIFT = 0.05                # sustained growth needs at least this drift
_TREND_PERSISTENCE = 0.5           # late increments must keep >= half the early pace
_WINDOW_GROWTH_FACTOR = 100.0      # window = trailing steps with 100x peak growth


class Verdict(Enum):
    BLOWS_UP = "BlowsUp"
    BOUNDED = "Bounded"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class OffsetEvidence:
    """What the classifier saw at one offset from the peak."""

    final_value: float
    window_start_value: float
    drift: float
    per_step_ratio: float
    strictly_increasing: bool
    trend_persistence: float

    def to_dict(self) -> dict:
        return {
            "final_value": self.final_value,
            "window_start_value": self.window_start_value,
            "drift": self.drift,
            "per_step_ratio": self.per_step_ratio,
            "strictly_increasing": self.strictly_increasing,
            "trend_persistence": self.trend_persistence,
        }


@dataclass(frozen=True)
class BlowupReport:
    """Per-offset verdicts for offsets 0, +-1, +-2 from the peak."""

    regime: str
    verdicts: dict[int, Verdict]
    evidence: dict[int, OffsetEvidence]
    expected: dict[int, Verdict] | None
    window_steps: int

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "offsets": [
                {"offset": k, "verdict": self.verdicts[k].value}
                for k in sorted(self.verdicts)
            ],
            "evidence": {str(k): self.evidence[k].to_dict() for k in sorted(self.evidence)},
            "expected": None
            if self.expected is None
            else {str(k): v.value for k, v in sorted(self.expected.items())},
            "window_steps": self.window_steps,
        }


_OFFSET_COLUMNS = {
    0: "u_m",
    -1: "u_m_minus_1",
    1: "u_m_plus_1",
    -2: "u_m_minus_2",
    2: "u_m_plus_2",
}


def _trailing_growth_window(u_m: np.ndarray, factor: float) -> int:
    """Index where the trailing window with peak growth >= factor begins."""
    final = u_m[-1]
    below = np.nonzero(u_m * factor > final)[0]
    start = int(below[0]) if below.size else len(u_m) - 1
    return max(0, start - 1)


def _classify_offset(v: np.ndarray, params: SimParams) -> tuple[Verdict, OffsetEvidence]:
    steps = len(v) - 1
    start, end = float(v[0]), float(v[-1])
    drift = (end - start) / start if start > 0.0 else 0.0
    ratio = (end / start) ** (1.0 / steps) if start > 0.0 and end > 0.0 else 0.0
    increments = np.diff(v)
    increasing = bool(np.all(increments > 0.0))
    half = steps // 2
    early = float(np.sum(increments[:half]))
    late = float(np.sum(increments[half:]))
    persistence = late / early if early > 0.0 else 0.0
    evidence = OffsetEvidence(
        final_value=end,
        window_start_value=start,
        drift=drift,
        per_step_ratio=ratio,
        strictly_increasing=increasing,
        trend_persistence=persistence,
    )

    geometric = (
        end >= math.sqrt(params.blow_threshold)
        and ratio >= 1.0 + _GEOMETRIC_RATIO_MARGIN * params.tau
    )
    if geometric:
        return Verdict.BLOWS_UP, evidence
    if abs(drift) < _BOUNDED_DRIFT:
        return Verdict.BOUNDED, evidence
    if increasing and drift >= _TREND_DRIFT and persistence >= _TREND_PERSISTENCE:
        return Verdict.BLOWS_UP, evidence
    return Verdict.UNDETERMINED, evidence


def classify_blowup_set(history: RunHistory, params: SimParams) -> BlowupReport:
    """Classify the tracked offsets of a blown-up, symmetric run.

    The verdict window is the trailing stretch over which the peak grew by
    a factor of 100.  An offset blows up if it either diverges geometrically
    (value beyond sqrt(blow_threshold) with per-step ratio above 1 + tau/2)
    or keeps growing without saturation across the window (strictly
    increasing, drift >= 5%, late increments at least half the early ones).
    It is bounded if it drifted by less than 1% across the window.
    """
    u_m = history.column("u_m")
    if len(u_m) < 3:
        raise ValueError("history too short to classify")
    sup = history.column("sup_norm")
    if sup[-1] < params.blow_threshold:
        raise ValueError("classification requires a run that reached blow_threshold")
    for k in (1, 2):
        left = history.column(_OFFSET_COLUMNS[-k])
        right = history.column(_OFFSET_COLUMNS[k])
        scale = np.maximum(np.abs(left), 1.0)
        if np.max(np.abs(left - right) / scale) > 1e-10:
            raise ValueError("classification requires a symmetric run")

    start = _trailing_growth_window(u_m, _WINDOW_GROWTH_FACTOR)
    verdicts: dict[int, Verdict] = {}
    evidence: dict[int, OffsetEvidence] = {}
    for offset, column in _OFFSET_COLUMNS.items():
        v = history.column(column)[start:]
        verdicts[offset], evidence[offset] = _classify_offset(v, params)

    regime = params.regime()
    expected: dict[int, Verdict] | None = None
    if regime == "multi-point":
        expected = {
            -1: Verdict.BLOWS_UP,
            1: Verdict.BLOWS_UP,
            -2: Verdict.BOUNDED,
            2: Verdict.BOUNDED,
        }
    elif regime == "single-point":
        expected = {-1: Verdict.BOUNDED, 1: Verdict.BOUNDED}
    return BlowupReport(
        regime=regime,
        verdicts=verdicts,
        evidence=evidence,
        expected=expected,
        window_steps=len(u_m) - 1 - start,
    )


@dataclass(frozen=True)
class RatioDiagnostics:
    """Peak-neighbour ratio sequence and its limit behaviour.

    ``neighbor_ratio`` is u at offset -1 over u at the peak, per step.  In
    the single-point regime it decays to 0 with per-step factor 1/(1+tau)
    while the peak growth tends to 1+tau.
    """

    applicable: bool
    reason: str
    neighbor_ratio: np.ndarray
    neighbor_ratio_change: np.ndarray
    peak_growth: np.ndarray
    mean_ratio_change: float
    mean_growth: float
    ratio_change_deviation: float
    growth_deviation: float
    strictly_decreasing_tail: bool
    sup_condition_observed: bool
    window: int
    tail_window: int

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "reason": self.reason,
            "mean_ratio_change": self.mean_ratio_change,
            "mean_growth": self.mean_growth,
            "ratio_change_deviation": self.ratio_change_deviation,
            "growth_deviation": self.growth_deviation,
            "strictly_decreasing_tail": self.strictly_decreasing_tail,
            "sup_condition_observed": self.sup_condition_observed,
            "window": self.window,
            "tail_window": self.tail_window,
        }


def peak_ratio_diagnostics(
    history: RunHistory,
    params: SimParams,
    *,
    window: int = 50,
    tail_window: int = 200,
) -> RatioDiagnostics:
    """Diagnose the neighbour-to-peak ratio limits of a blown-up run.

    Applicable in the single-point regime (p > 2, q < 2(p-1)/p) once the run
    reached the threshold; otherwise the report is marked not applicable and
    carries no computed limits.
    """
    empty = np.empty(0)
    not_applicable = RatioDiagnostics(
        applicable=False,
        reason="",
        neighbor_ratio=empty,
        neighbor_ratio_change=empty,
        peak_growth=empty,
        mean_ratio_change=math.nan,
        mean_growth=math.nan,
        ratio_change_deviation=math.nan,
        growth_deviation=math.nan,
        strictly_decreasing_tail=False,
        sup_condition_observed=False,
        window=window,
        tail_window=tail_window,
    )
    if params.regime() != "single-point":
        return dc_replace(
            not_applicable,
            reason=f"regime {params.regime()!r} is outside p > 2, q < 2(p-1)/p",
        )
    sup = history.column("sup_norm")
    if len(sup) < window + 2 or sup[-1] < params.blow_threshold:
        return dc_replace(not_applicable, reason="run did not reach blow_threshold")

    u_m = history.column("u_m")
    u_m1 = history.column("u_m_minus_1")
    a = u_m1 / u_m
    ratio_change = a[1:] / a[:-1]
    growth = u_m[1:] / u_m[:-1]

    mean_ratio_change = float(np.mean(ratio_change[-window:]))
    mean_growth = float(np.mean(growth[-window:]))
    target_change = 1.0 / (1.0 + params.tau)
    target_growth = 1.0 + params.tau
    tail = a[-(tail_window + 1) :]
    strictly_decreasing = bool(np.all(np.diff(tail) < 0.0))
    sup_condition = float(np.max(u_m1)) > 3.0 * (1.0 + params.tau) / params.h**2

    return RatioDiagnostics(
        applicable=True,
        reason="ok",
        neighbor_ratio=a,
        neighbor_ratio_change=ratio_change,
        peak_growth=growth,
        mean_ratio_change=mean_ratio_change,
        mean_growth=mean_growth,
        ratio_change_deviation=abs(mean_ratio_change - target_change) / target_change,
        growth_deviation=abs(mean_growth - target_growth) / target_growth,
        strictly_decreasing_tail=strictly_decreasing,
        sup_condition_observed=sup_condition,
        window=window,
        tail_window=tail_window,
    )


def amplitude_lower_bound(p: float, lam: float) -> float:
    """Classical lower bound 1/((p-1) * lam^(p-1)) on the blow-up time."""
    return 1.0 / ((p - 1.0) * lam ** (p - 1.0))


def geometric_upper_bound(params: SimParams, peak0: float) -> float | None:
    """Closed-form upper bound on the numerical blow-up time.

    Derived from the per-step lower growth bound of the peak: the time
    increments are dominated by a geometric series whose ratio involves
    eps0 = tau * 2^(-q/(2-q)) * peak0^((-2p + q(1+p))/(2-q)).  Returns None
    when the series ratio is not below 1 (amplitude too small for the bound).
    """
    p, q, tau = params.p, params.q, params.tau
    eps0 = tau * 2.0 ** (-q / (2.0 - q)) * peak0 ** ((-2.0 * p + q * (1.0 + p)) / (2.0 - q))
    ratio = ((1.0 + eps0) / (1.0 + tau)) ** (p - 1.0)
    if ratio >= 1.0:
        return None
    return (tau / peak0 ** (p - 1.0)) / (1.0 - ratio)


@dataclass(frozen=True)
class TimeBounds:
    """Numerical blow-up time with its two-sided bounds."""

    t_num_partial: float
    tail: float
    lower_g: float
    upper: float | None
    sandwich_ok: bool

    @property
    def t_num(self) -> float:
        return self.t_num_partial + self.tail

    def to_dict(self) -> dict:
        return {
            "T_num": self.t_num,
            "T_num_partial": self.t_num_partial,
            "tail": self.tail,
            "g": self.lower_g,
            "T_star_star": self.upper,
            "sandwich_ok": self.sandwich_ok,
        }


def blowup_time_bounds(outcome: RunOutcome, params: SimParams) -> TimeBounds:
    """Sandwich the numerical blow-up time between g(lambda) and the
    geometric upper bound, for sine-bump runs where the initial peak is lam."""
    if outcome.status is not RunStatus.BLEW_UP:
        raise ValueError("time bounds require a run that blew up")
    g = amplitude_lower_bound(params.p, params.lam)
    upper = geometric_upper_bound(params, params.lam)
    total = outcome.t_num_partial + outcome.t_num_tail
    ok = upper is not None and g <= total <= upper
    return TimeBounds(
        t_num_partial=outcome.t_num_partial,
        tail=outcome.t_num_tail,
        lower_g=g,
        upper=upper,
        sandwich_ok=bool(ok),
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Grid-refinement study: measured error orders against a fine reference."""

    t_check: float
    levels: tuple[float, ...]
    errors: tuple[float, ...]
    fitted_order: float
    expected_order: float
    compared_upto: str  # "mid-1" (q = 1) or "mid-2" (q > 1 damped case)
    reference_h: float

    def to_dict(self) -> dict:
        return {
            "t_check": self.t_check,
            "levels": list(self.levels),
            "errors": list(self.errors),
            "fitted_order": self.fitted_order,
            "expected_order": self.expected_order,
            "compared_upto": self.compared_upto,
            "reference_h": self.reference_h,
        }


def _solution_at_time(
    params: SimParams,
    t_check: float,
    initial: InitialData | None,
) -> tuple[np.ndarray, int, int]:
    """Run to t_check and interpolate the node values linearly in time.

    Returns (values, mid, interval_count).  The run must reach t_check
    before blowing up or exhausting its budget.
    """
    outcome, history = run(
        params, initial, snapshot_every=1, t_stop=t_check, monitor=False
    )
    if outcome.status is not RunStatus.TIME_LIMIT:
        raise ValueError(
            f"run at h={params.h} ended with {outcome.status.value} before "
            f"t_check={t_check}; pick a smaller t_check"
        )
    snaps = history.snapshots
    idx = next(i for i, s in enumerate(snaps) if s[1] >= t_check)
    after = snaps[idx]
    before = snaps[idx - 1] if idx > 0 else after
    if before[3].size != after[3].size:
        raise ValueError("grid changed across t_check; pick a smaller t_check")
    t0, u0 = before[1], before[3]
    t1, u1 = after[1], after[3]
    if t1 == t0:
        u = u1.copy()
    else:
        w = (t_check - t0) / (t1 - t0)
        u = u0 + w * (u1 - u0)
    k = u.size - 1
    return u, k // 2, k


def compare_to_reference(
    u_level: np.ndarray,
    k_level: int,
    u_ref: np.ndarray,
    k_ref: int,
    upto_offset: int,
) -> float:
    """Max nodal error over indices 1..mid-upto_offset at shared nodes."""
    if k_ref % k_level != 0:
        raise ValueError(f"grids are not nested: {k_ref} vs {k_level} intervals")
    stride = k_ref // k_level
    mid = k_level // 2
    top = mid - upto_offset
    if top < 1:
        raise ValueError("grid too coarse for the compared index range")
    j = np.arange(1, top + 1)
    return float(np.max(np.abs(u_level[j] - u_ref[j * stride])))


def convergence_study(
    params: SimParams,
    t_check: float | None = None,
    grid_levels: tuple[float, ...] = (0.1, 0.05, 0.025),
    reference_h: float | None = None,
    initial: InitialData | None = None,
) -> ConvergenceReport:
    """Measure the scheme's spatial convergence order by grid refinement.

    Runs each level to ``t_check`` (default: half the coarsest level's
    blow-up time estimate), compares against a reference run at least 4x
    finer than the finest level, and fits the slope of log(error) against
    log(h).  The expected order is 2 for q = 1 (errors compared over
    indices 1..mid-1) and 3-q in the damped case p > 2, q < 2(p-1)/p
    (indices 1..mid-2).
    """
    if len(grid_levels) < 3:
        raise ValueError("need at least 3 grid levels")
    counts = [interval_count_for(h) for h in grid_levels]
    for a, b in zip(counts, counts[1:]):
        if b != 2 * a:
            raise ValueError(f"levels must halve h: got interval counts {counts}")
    if params.q == 1.0:
        upto, expected = 1, 2.0
    elif params.p > 2.0 and params.q < 2.0 * (params.p - 1.0) / params.p:
        upto, expected = 2, 3.0 - params.q
    else:
        raise ValueError(
            "no proven convergence order for this (p, q); need q = 1 or "
            "p > 2 with q < 2(p-1)/p"
        )

    if t_check is None:
        coarse, _ = run(dc_replace(params, h=grid_levels[0]), initial, monitor=False)
        if coarse.status is not RunStatus.BLEW_UP:
            raise ValueError("coarse run did not blow up; cannot pick t_check")
        t_check = 0.5 * (coarse.t_num_partial + coarse.t_num_tail)

    if reference_h is None:
        reference_h = grid_levels[-1] / 4.0
    k_fine = interval_count_for(grid_levels[-1])
    k_ref = interval_count_for(reference_h)
    if k_ref < 4 * k_fine or k_ref % k_fine != 0:
        raise ValueError("reference grid must be a nested refinement >= 4x the finest level")

    u_ref, _, k_ref = _solution_at_time(
        dc_replace(params, h=reference_h), t_check, initial
    )

    snapped = []
    errors = []
    for h_level in grid_levels:
        u_lvl, _, k_lvl = _solution_at_time(
            dc_replace(params, h=h_level), t_check, initial
        )
        snapped.append(2.0 / k_lvl)
        errors.append(compare_to_reference(u_lvl, k_lvl, u_ref, k_ref, upto))

    slope = float(np.polyfit(np.log(snapped), np.log(errors), 1)[0])
    return ConvergenceReport(
        t_check=t_check,
        levels=tuple(snapped),
        errors=tuple(errors),
        fitted_order=slope,
        expected_order=expected,
        compared_upto=f"mid-{upto}",
        reference_h=2.0 / k_ref,
    )
