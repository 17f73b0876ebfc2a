"""Choosing which nodes to control so the rest of the network still eliminates the disease.

Two passes.  The first forces control at every node that cannot recover on
its own (``d_i <= b_ii``).  The second walks the strongly connected
components of what is left and, while a component's sum of cycle gains is at
least one, moves a node of its heaviest cycle into the controlled set.  A
sum below one on every component makes the uncontrolled block Hurwitz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import CycleReport, cycle_gains, scc
from .network import EpidemicNetwork, partition
from .spectral import EPS_HURWITZ, spectral_abscissa

TIE_BREAKS = ("deterministic", "seeded")


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class RemovalStep:
    component: tuple[int, ...]
    removed: int
    eta: tuple[int, ...]
    gamma_eta: float
    S_before: float
    S_after: float

    def to_dict(self) -> dict:
        return {
            "component": list(self.component),
            "removed": self.removed,
            "eta": list(self.eta),
            "gamma_eta": self.gamma_eta,
            "S_before": self.S_before,
            "S_after": self.S_after,
        }


@dataclass(frozen=True)
class SelectionResult:
    controlled: tuple[int, ...]
    uncontrolled: tuple[int, ...]
    certificate: float
    stage2_trace: tuple[RemovalStep, ...]
    feasible: bool
    stage1: tuple[int, ...] = ()
    reports: tuple[CycleReport, ...] = field(default=(), repr=False)

    def to_dict(self, net: EpidemicNetwork | None = None, explain: bool = False) -> dict:
        name = (lambda i: i) if net is None else net.name
        out = {
            "feasible": self.feasible,
            "controlled": [name(i) for i in self.controlled],
            "uncontrolled": [name(i) for i in self.uncontrolled],
            "stage1": [name(i) for i in self.stage1],
            "certificate": _finite_or_none(self.certificate),
            "hurwitz": bool(self.certificate < -EPS_HURWITZ),
            "stage2_trace": [s.to_dict() for s in self.stage2_trace],
        }
        if explain:
            out["cycle_reports"] = [r.to_dict() for r in self.reports]
        return out


def _finite_or_none(v: float):
    return v if math.isfinite(v) else None


def exists_partial_solution(net: EpidemicNetwork) -> bool:
    """True iff some node recovers faster than it reinfects itself."""
    return bool(np.any(net.d > np.diag(net.b)))


def stage1(net: EpidemicNetwork) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Nodes with ``d_i <= b_ii`` (which must be controlled) and the remainder."""
    forced = net.d <= np.diag(net.b)
    c0 = tuple(int(i) for i in np.flatnonzero(forced))
    rest = tuple(int(i) for i in np.flatnonzero(~forced))
    return c0, rest


def _weighted_degree(b: np.ndarray, node: int, within: list[int]) -> float:
    others = [j for j in within if j != node]
    return float(b[node, others].sum() + b[others, node].sum())


def _pick(net: EpidemicNetwork, eta: tuple[int, ...], within: list[int], rng) -> int:
    if rng is not None:
        return int(eta[int(rng.integers(len(eta)))])
    return min(eta, key=lambda i: (-_weighted_degree(net.b, i, within), i))


def stage2(
    net: EpidemicNetwork,
    c0,
    tie_break: str = "deterministic",
    seed: int | np.random.Generator | None = None,
) -> SelectionResult:
    """Break heavy cycles in each component of the not-yet-controlled subgraph.

    Components are computed once, on entry; each is then shrunk in place
    until its sum-cycle gain drops below one.  With ``tie_break="seeded"``
    both the choice among equally heavy cycles and the node removed from
    the chosen cycle are drawn from ``seed``.
    """
    if tie_break not in TIE_BREAKS:
        raise SelectionError(f"tie_break must be one of {TIE_BREAKS}")
    rng = None
    if tie_break == "seeded":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    controlled = set(int(i) for i in c0)
    remaining = [i for i in range(net.n) if i not in controlled]
    if not remaining:
        raise SelectionError("every node is already controlled; nothing left to split")

    sub = net.b[np.ix_(remaining, remaining)]
    components = [[remaining[k] for k in comp] for comp in scc(sub)]
    trace: list[RemovalStep] = []
    reports: list[CycleReport] = []
    for comp in components:
        current = list(comp)
        pending = None
        while True:
            rep = cycle_gains(net.d[current], net.b[np.ix_(current, current)], nodes=current, rng=rng)
            reports.append(rep)
            if pending is not None:
                trace.append(RemovalStep(*pending, S_after=rep.S))
            if rep.S < 1:
                break
            node = _pick(net, rep.eta, current, rng)
            pending = (tuple(comp), node, rep.eta, rep.gamma_eta, rep.S)
            current.remove(node)
            controlled.add(node)

    C = tuple(sorted(controlled))
    U = tuple(i for i in range(net.n) if i not in controlled)
    check = verify_partition(net, C)
    return SelectionResult(
        controlled=C,
        uncontrolled=U,
        certificate=check["abscissa"],
        stage2_trace=tuple(trace),
        feasible=bool(U) and check["hurwitz"],
        stage1=tuple(sorted(int(i) for i in c0)),
        reports=tuple(reports),
    )


def verify_partition(net: EpidemicNetwork, controlled) -> dict:
    """Hurwitz test of ``-D1 + B11`` over the nodes outside ``controlled``.

    Leaving every node controlled gives an empty block with abscissa
    ``-inf``, which counts as Hurwitz.
    """
    part = partition(net, controlled)
    s = spectral_abscissa(part.uncontrolled_matrix()).value
    return {"hurwitz": bool(s < -EPS_HURWITZ), "abscissa": float(s)}


def select(
    net: EpidemicNetwork,
    tie_break: str = "deterministic",
    seed: int | np.random.Generator | None = None,
) -> SelectionResult:
    """Full two-pass selection; infeasible networks yield ``feasible=False``."""
    c0, rest = stage1(net)
    if not rest:
        return SelectionResult(c0, (), -math.inf, (), False, stage1=c0)
    return stage2(net, c0, tie_break, seed)
