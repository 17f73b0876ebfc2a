"""Strongly connected components, simple cycles and sum-cycle gains.

Graphs are given as square matrices following the transmission convention
used throughout the package: a positive entry ``a[i, j]`` (``i != j``) is a
directed edge ``j -> i``.  Diagonal entries never create edges, so self-loops
are ignored by every routine here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_CYCLES = 1_000_000


class CycleLimitError(RuntimeError):
    """Raised when cycle enumeration exceeds the configured guard."""


def successors(adjacency) -> list[list[int]]:
    """Out-neighbour lists (ascending) of the graph encoded by ``adjacency``."""
    a = np.asarray(adjacency)
    n = a.shape[0]
    out: list[list[int]] = []
    for j in range(n):
        col = a[:, j]
        out.append([i for i in range(n) if i != j and col[i] > 0])
    return out


def _as_successors(adjacency, nodes: int | None) -> list[list[int]]:
    if nodes is None:
        return successors(adjacency)
    succ: list[set[int]] = [set() for _ in range(nodes)]
    for src, dst in adjacency:
        if not (0 <= src < nodes and 0 <= dst < nodes):
            raise IndexError(f"edge ({src}, {dst}) outside 0..{nodes - 1}")
        if src != dst:
            succ[src].add(dst)
    return [sorted(s) for s in succ]


def scc(adjacency, nodes: int | None = None) -> list[list[int]]:
    """Strongly connected components via an iterative Tarjan search.

    ``adjacency`` is either a square matrix or, when ``nodes`` is given, an
    iterable of ``(src, dst)`` edges over ``range(nodes)``.  Each component
    is sorted and the list is ordered by smallest member.
    """
    succ = _as_successors(adjacency, nodes)
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            nbrs = succ[v]
            if pos < len(nbrs):
                work[-1] = (v, pos + 1)
                w = nbrs[pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))

    comps.sort(key=lambda c: c[0])
    return comps


def is_strongly_connected(adjacency) -> bool:
    n = np.asarray(adjacency).shape[0]
    return n >= 1 and len(scc(adjacency)) == 1


def simple_cycles(adjacency, limit: int = MAX_CYCLES) -> list[tuple[int, ...]]:
    """Enumerate every simple cycle of length >= 2 exactly once.

    Johnson-style backtracking with blocked sets.  Cycles are rooted at their
    smallest node and emitted in ascending root order, with successors
    explored in ascending order, so the output is deterministic.  A cycle
    ``(i1, ..., ih)`` stands for the edges ``i1 -> i2 -> ... -> ih -> i1``.
    """
    succ = successors(adjacency)
    n = len(succ)
    cycles: list[tuple[int, ...]] = []

    for s in range(n):
        # restrict to nodes >= s, then to the component containing s
        allowed = [v >= s for v in range(n)]
        sub_succ = [[w for w in succ[v] if allowed[w]] if allowed[v] else [] for v in range(n)]
        comp = _component_of(sub_succ, s)
        if len(comp) < 2:
            continue
        in_comp = set(comp)
        local = {v: [w for w in sub_succ[v] if w in in_comp] for v in comp}

        blocked = {v: False for v in comp}
        bmap: dict[int, set[int]] = {v: set() for v in comp}
        path = [s]
        blocked[s] = True
        frames = [(s, iter(local[s]), False)]
        while frames:
            v, it, found = frames[-1]
            w = next(it, None)
            if w is not None:
                if w == s:
                    cycles.append(tuple(path))
                    if len(cycles) > limit:
                        raise CycleLimitError(
                            f"more than {limit} simple cycles; decompose the graph "
                            "(e.g. by strongly connected component) before enumerating"
                        )
                    frames[-1] = (v, it, True)
                elif not blocked[w]:
                    path.append(w)
                    blocked[w] = True
                    frames.append((w, iter(local[w]), False))
                continue
            frames.pop()
            path.pop()
            if found:
                _unblock(v, blocked, bmap)
            else:
                for w in local[v]:
                    bmap[w].add(v)
            if frames:
                pv, pit, pfound = frames[-1]
                frames[-1] = (pv, pit, pfound or found)
    return cycles


def _component_of(succ: list[list[int]], s: int) -> list[int]:
    fwd = _reach(succ, s)
    pred: list[list[int]] = [[] for _ in succ]
    for v, ws in enumerate(succ):
        for w in ws:
            pred[w].append(v)
    back = _reach(pred, s)
    return sorted(fwd & back)


def _reach(succ: list[list[int]], s: int) -> set[int]:
    seen = {s}
    todo = [s]
    while todo:
        v = todo.pop()
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def _unblock(v: int, blocked: dict, bmap: dict) -> None:
    todo = [v]
    while todo:
        u = todo.pop()
        if blocked[u]:
            blocked[u] = False
            todo.extend(bmap[u])
            bmap[u].clear()


def sum_cycle_gain(m, cycle: Sequence[int]):
    """Product of ``m[next, cur] / -m[next, next]`` around ``cycle``.

    Works with any numeric element type supporting ``*`` and ``/`` (floats,
    :class:`fractions.Fraction`), so exact rational gains are available by
    passing an object array of fractions.
    """
    if len(cycle) < 2:
        raise ValueError("a simple cycle has at least two nodes")
    gain = None
    h = len(cycle)
    for k in range(h):
        cur, nxt = cycle[k], cycle[(k + 1) % h]
        diag = m[nxt][nxt]
        if not diag < 0:
            raise ValueError(f"diagonal entry at node {nxt} is {diag}; must be strictly negative")
        w = m[nxt][cur]
        if not w > 0:
            raise ValueError(f"cycle edge {cur} -> {nxt} is missing (weight {w})")
        term = w / -diag
        gain = term if gain is None else gain * term
    return gain


@dataclass(frozen=True)
class CycleReport:
    cycles: tuple[tuple[int, ...], ...]
    gains: tuple[float, ...]
    S: float
    eta: tuple[int, ...] | None
    gamma_eta: float
    nodes: tuple[int, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "cycles": [list(c) for c in self.cycles],
            "gains": list(self.gains),
            "S": self.S,
            "eta": None if self.eta is None else list(self.eta),
            "gamma_eta": self.gamma_eta,
        }


def cycle_gains(
    d_block,
    b_block,
    nodes: Iterable[int] | None = None,
    rng: np.random.Generator | None = None,
    limit: int = MAX_CYCLES,
) -> CycleReport:
    """Sum-cycle gains of ``-diag(d_block) + b_block``.

    ``nodes`` maps block positions to the node ids reported in the result
    (default ``0..k-1``).  The maximum-gain cycle is the lexicographically
    smallest among the maxima unless ``rng`` is given, in which case one of
    the maxima is drawn uniformly.
    """
    d = np.asarray(d_block, dtype=float)
    b = np.asarray(b_block, dtype=float)
    k = d.shape[0]
    labels = tuple(range(k)) if nodes is None else tuple(nodes)
    if b.shape != (k, k) or len(labels) != k:
        raise ValueError("d_block, b_block and nodes disagree in size")
    bad = [labels[i] for i in range(k) if not d[i] > b[i, i]]
    if bad:
        raise ValueError(f"need d_i > b_ii on the block; violated at nodes {bad}")

    m = -np.diag(d) + b
    local = simple_cycles(m, limit=limit)
    cycles = tuple(_canonical(tuple(labels[i] for i in c)) for c in local)
    gains = tuple(float(sum_cycle_gain(m, c)) for c in local)
    if not cycles:
        return CycleReport((), (), 0.0, None, 0.0, labels)

    order = sorted(range(len(cycles)), key=lambda i: cycles[i])
    cycles = tuple(cycles[i] for i in order)
    gains = tuple(gains[i] for i in order)
    top = max(gains)
    ties = [i for i, g in enumerate(gains) if g >= top * (1 - 1e-12)]
    pick = ties[0] if rng is None else ties[int(rng.integers(len(ties)))]
    return CycleReport(cycles, gains, float(sum(gains)), cycles[pick], gains[pick], labels)


def _canonical(cycle: tuple[int, ...]) -> tuple[int, ...]:
    k = cycle.index(min(cycle))
    return cycle[k:] + cycle[:k]
