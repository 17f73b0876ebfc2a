"""Post-hoc checks of simulated trajectories against the analytic guarantees.

Each check returns a :class:`BoundReport` with one entry per node (or a
single network-level entry) so failures point at the offending node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlConfig
from .integrator import EPS_CONV, EPS_EXTINCT, Trajectory
from .network import EpidemicNetwork
from .spectral import spectral_radius

SLACK = 1e-6
G_FLOOR = 1e-6
DECAY_SLOPE = -1e-4


class VerificationError(ValueError):
    pass


@dataclass(frozen=True)
class BoundEntry:
    node: int | None
    bound_value: float
    observed_value: float
    satisfied: bool
    margin: float

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "bound_value": _json_float(self.bound_value),
            "observed_value": _json_float(self.observed_value),
            "satisfied": self.satisfied,
            "margin": _json_float(self.margin),
        }


@dataclass(frozen=True)
class BoundReport:
    tag: str
    entries: tuple[BoundEntry, ...]
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "passed": self.passed,
            "note": self.note,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoundReport":
        entries = tuple(
            BoundEntry(e["node"], _from_json(e["bound_value"]), _from_json(e["observed_value"]),
                       e["satisfied"], _from_json(e["margin"]))
            for e in data["entries"]
        )
        return cls(data["tag"], entries, data["passed"], data.get("note", ""))


def _json_float(v: float):
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _from_json(v) -> float:
    return float(v)


def _report(tag: str, entries: list[BoundEntry], note: str = "") -> BoundReport:
    return BoundReport(tag, tuple(entries), all(e.satisfied for e in entries), note)


def _upper(node, bound, observed, slack) -> BoundEntry:
    return BoundEntry(node, float(bound), float(observed), bool(observed <= bound + slack), float(bound - observed))


def _lower(node, bound, observed, slack) -> BoundEntry:
    return BoundEntry(node, float(bound), float(observed), bool(observed >= bound - slack), float(observed - bound))


def _require_mode(cfg: ControlConfig, mode: str, check: str) -> None:
    if cfg.mode != mode:
        raise VerificationError(f"{check} applies to {mode} control, not {cfg.mode}")


def gain_upper_bound(x0, alpha, p: int, d):
    """``exp(-alpha x0^p / (p d))``, the ceiling on limiting infection gains."""
    return np.exp(-np.asarray(alpha) * np.asarray(x0) ** p / (p * np.asarray(d)))


def recovery_lower_bound(x0, alpha, p: int, d):
    """``sqrt(alpha x0^p / (d p))``, the floor on limiting recovery gains."""
    return np.sqrt(np.asarray(alpha) * np.asarray(x0) ** p / (np.asarray(d) * p))


def check_gain_upper_bound(traj: Trajectory, cfg: ControlConfig, net: EpidemicNetwork,
                           slack: float = SLACK) -> BoundReport:
    _require_mode(cfg, "infection", "gain upper bound")
    bound = gain_upper_bound(traj.x0, cfg.alpha, cfg.p, net.d)
    entries = [_upper(i, bound[i], traj.final_gains[i], slack) for i in cfg.controlled]
    return _report("gain_upper_bound", entries)


def check_gain_lower_bound_recovery(traj: Trajectory, cfg: ControlConfig, net: EpidemicNetwork,
                                    slack: float = SLACK) -> BoundReport:
    _require_mode(cfg, "recovery", "recovery gain lower bound")
    bound = recovery_lower_bound(traj.x0, cfg.alpha, cfg.p, net.d)
    entries = [_lower(i, bound[i], traj.final_gains[i], slack) for i in cfg.controlled]
    return _report("recovery_gain_lower_bound", entries)


def limiting_reproduction_number(net: EpidemicNetwork, cfg: ControlConfig, gains) -> float:
    """Reproduction number with gains frozen at ``gains`` (zero gains allowed)."""
    g = np.asarray(gains, dtype=float)
    if cfg.mode == "recovery":
        return spectral_radius(net.b / (net.d * g)[:, None]).value
    if cfg.mode == "uncontrolled":
        g = np.ones(net.n)
    return spectral_radius((np.clip(g, 0.0, None) / net.d)[:, None] * net.b).value


def check_r_infinity(traj: Trajectory, net: EpidemicNetwork, cfg: ControlConfig,
                     slack: float = SLACK) -> BoundReport:
    """``R_inf <= 1``, and ``< 1`` strictly for first-power infection control."""
    if traj.terminal != "extinct":
        raise VerificationError(f"R_inf check needs an extinct run, got terminal = {traj.terminal}")
    r = limiting_reproduction_number(net, cfg, traj.final_gains)
    entries = [_upper(None, 1.0, r, slack)]
    note = "R_inf <= 1"
    if cfg.mode == "infection" and cfg.p == 1 and cfg.is_full:
        entries.append(BoundEntry(None, 1.0, r, bool(r < 1 - slack), 1.0 - r))
        note = "R_inf < 1 (p = 1)"
    return _report("r_infinity", entries, note)


def extrapolate_r_infinity(traj: Trajectory) -> float:
    """Limit of ``R_t`` from a fit ``R_t = R_inf + c / t`` over the last decade of samples.

    Meant for runs still decaying algebraically at the horizon (``p > 1``),
    where the gains have not settled and ``final_gains`` understates the
    limit.  Returns NaN with fewer than three usable samples.
    """
    t, r = traj.r_t_times, traj.r_t
    keep = (t > 0) & np.isfinite(r)
    t, r = t[keep], r[keep]
    if t.size < 3:
        return math.nan
    mask = t >= t.max() / 10
    if mask.sum() < 3:
        return math.nan
    design = np.column_stack([np.ones(mask.sum()), 1.0 / t[mask]])
    coef, *_ = np.linalg.lstsq(design, r[mask], rcond=None)
    return float(coef[0])


def check_finite_time_positivity(traj: Trajectory, eps_extinct: float = EPS_EXTINCT) -> bool:
    """Every coordinate strictly inside (0, 1) at sampled times before extinction.

    A fixed-step scheme spreads infection by a bounded number of hops per step
    (four for RK4), so samples earlier than ``ceil(n/4)`` steps are skipped.
    Runs starting from ``x = 0`` do not meet the precondition and pass
    vacuously.
    """
    if not np.any(traj.x0 > 0):
        return True
    t_min = math.ceil(traj.n / 4) * traj.step
    below = traj.first_time_below(eps_extinct)
    mask = (traj.times >= t_min - 1e-12) & (traj.times < below)
    xs = traj.x[mask]
    return bool(np.all((xs > 0) & (xs < 1)))


def check_escape_bound(traj: Trajectory, cfg: ControlConfig, slack: float = SLACK) -> BoundReport:
    """Recovery gains never outrun the linear envelope ``g(0) + alpha t``."""
    _require_mode(cfg, "recovery", "escape bound")
    env = traj.g0[None, :] + cfg.alpha[None, :] * traj.times[:, None]
    excess = traj.g - env
    worst = np.argmax(excess, axis=0)
    entries = [
        _upper(i, env[worst[i], i], traj.g[worst[i], i], slack) for i in range(traj.n)
    ]
    return _report("escape_bound", entries)


def check_gain_limits(traj: Trajectory, cfg: ControlConfig, floor: float = G_FLOOR,
                      slack: float = SLACK) -> BoundReport:
    """Limiting gains bounded away from zero (infection) or finite and at least one (recovery).

    "Finite" means every gain sits below the linear envelope evaluated at the
    horizon and has settled: either the tail window shows no drift, or the run
    is extinct and the growth still to come, projected from the fitted decay
    rate, is below ``EPS_CONV``.
    """
    if cfg.mode == "infection":
        entries = [
            BoundEntry(i, floor, float(g), bool(g > floor), float(g - floor))
            for i, g in enumerate(traj.final_gains)
        ]
        return _report("gain_positive", entries)
    if cfg.mode == "recovery":
        env = traj.g0 + cfg.alpha * traj.horizon
        rest = projected_gain_growth(traj, cfg)
        settled = traj.converged or bool(np.all(rest <= EPS_CONV * np.maximum(1.0, traj.final_gains)))
        entries = []
        for i, g in enumerate(traj.final_gains):
            ok = bool(np.isfinite(g) and g >= 1 - slack and g <= env[i] + slack and settled)
            entries.append(BoundEntry(i, float(env[i]), float(g), ok, float(env[i] - g)))
        note = "" if traj.converged else ("settled by decay projection" if settled else "gains still drifting")
        return _report("gain_finite", entries, note)
    raise VerificationError("uncontrolled runs have no gain limits")


def projected_gain_growth(traj: Trajectory, cfg: ControlConfig) -> np.ndarray:
    """Recovery-gain growth left after the last sample, assuming ``x`` keeps its fitted decay rate.

    With ``x_i(t) = x_i(T) exp(-lam (t - T))`` the remaining integral of
    ``alpha x_i^p`` is ``alpha x_i(T)^p / (p lam)``.  Infinite when the run
    is not extinct or the fitted slope is not negative.
    """
    slope = decay_slope(traj)
    if traj.terminal != "extinct" or not slope < 0:
        return np.full(traj.n, np.inf)
    return cfg.alpha * traj.x[-1] ** cfg.p / (cfg.p * -slope)


def decay_slope(traj: Trajectory, eps_extinct: float = EPS_EXTINCT) -> float:
    """Least-squares slope of ``log max_i x_i`` over the last decade of log-time.

    Only samples with a positive, not-yet-extinct infection level enter the
    fit.  Returns NaN when fewer than three samples qualify.
    """
    top = traj.x.max(axis=1)
    alive = (top > 0) & (traj.times > 0)
    end = traj.times[alive].max() if np.any(alive) else 0.0
    mask = alive & (traj.times >= end / 10)
    if mask.sum() < 3:
        return math.nan
    slope, _ = np.polyfit(traj.times[mask], np.log(top[mask]), 1)
    return float(slope)


def check_exponential_decay(traj: Trajectory, max_slope: float = DECAY_SLOPE) -> BoundReport:
    slope = decay_slope(traj)
    entry = BoundEntry(None, max_slope, slope, bool(slope < max_slope), max_slope - slope)
    return _report("exponential_decay", [entry])


def run_checks(traj: Trajectory, net: EpidemicNetwork, cfg: ControlConfig,
               floor: float = G_FLOOR) -> list[BoundReport]:
    """All checks whose preconditions the run meets."""
    reports: list[BoundReport] = []
    if net.strongly_connected:
        positive = check_finite_time_positivity(traj)
        reports.append(_report("finite_time_positivity", [BoundEntry(None, 0.0, 0.0, positive, 0.0)]))
    if cfg.mode == "uncontrolled" or traj.terminal != "extinct":
        return reports
    reports.append(check_gain_limits(traj, cfg, floor))
    reports.append(check_r_infinity(traj, net, cfg))
    if cfg.mode == "infection":
        reports.append(check_gain_upper_bound(traj, cfg, net))
    else:
        reports.append(check_gain_lower_bound_recovery(traj, cfg, net))
        reports.append(check_escape_bound(traj, cfg))
    return reports
