"""SIS network data: recovery rates ``d`` and transmission matrix ``b``.

``b[i, j]`` is the rate at which infected individuals of node ``j`` infect
susceptibles of node ``i``; in graph terms it is the weight of edge ``j -> i``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graphs import scc
from .spectral import spectral_radius


class NetworkError(ValueError):
    """Malformed or invalid network data."""


@dataclass(frozen=True, eq=False)
class EpidemicNetwork:
    d: np.ndarray
    b: np.ndarray
    labels: tuple[str, ...] | None = None
    require_strong_connectivity: bool = False
    strongly_connected: bool = field(init=False)

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        b = np.array(self.b, dtype=float)
        if d.ndim != 1 or d.size < 1:
            raise NetworkError(f"d must be a nonempty vector, got shape {d.shape}")
        n = d.size
        if b.shape != (n, n):
            raise NetworkError(f"dimension mismatch: b has shape {b.shape}, d has length {n}")
        for i in range(n):
            if not math.isfinite(d[i]) or d[i] <= 0:
                raise NetworkError(f"nonpositive recovery rate d[{i}] = {d[i]}")
        bad = np.argwhere(~np.isfinite(b))
        if bad.size:
            i, j = bad[0]
            raise NetworkError(f"non-finite entry at row {i}, column {j}")
        neg = np.argwhere(b < 0)
        if neg.size:
            i, j = neg[0]
            raise NetworkError(f"negative entry {b[i, j]} at row {i}, column {j}")
        labels = None if self.labels is None else tuple(str(x) for x in self.labels)
        if labels is not None and len(labels) != n:
            raise NetworkError(f"{len(labels)} labels for {n} nodes")
        d.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "labels", labels)
        comps = scc(b)
        object.__setattr__(self, "strongly_connected", len(comps) == 1)
        if self.require_strong_connectivity and len(comps) != 1:
            raise NetworkError(
                f"graph is not strongly connected: {len(comps)} components, "
                f"e.g. {self._names(comps[-1])}"
            )

    @property
    def n(self) -> int:
        return self.d.size

    def name(self, i: int) -> str:
        return self.labels[i] if self.labels else str(i)

    def _names(self, nodes) -> list[str]:
        return [self.name(i) for i in nodes]

    def index(self, key) -> int:
        """Node index from an int or a label."""
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.n:
                raise IndexError(f"node index {key} out of range 0..{self.n - 1}")
            return int(key)
        if self.labels and key in self.labels:
            return self.labels.index(key)
        if isinstance(key, str) and key.isdigit():
            return self.index(int(key))
        raise KeyError(f"unknown node {key!r}")

    def r0(self) -> float:
        return spectral_radius(self.b / self.d[:, None]).value

    def with_b(self, b) -> "EpidemicNetwork":
        return EpidemicNetwork(self.d, b, self.labels)

    def to_dict(self) -> dict:
        out = {"n": self.n, "d": self.d.tolist(), "b": self.b.tolist()}
        if self.labels:
            out["labels"] = list(self.labels)
        return out

    def same_as(self, other: "EpidemicNetwork") -> bool:
        return (
            np.array_equal(self.d, other.d)
            and np.array_equal(self.b, other.b)
            and self.labels == other.labels
        )


@dataclass(frozen=True)
class ValidationReport:
    strongly_connected: bool
    r0: float
    assumption2: bool
    self_sufficient: tuple[int, ...]
    components: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict:
        return {
            "strongly_connected": self.strongly_connected,
            "r0": self.r0,
            "assumption_r0_gt_1": self.assumption2,
            "nodes_d_gt_bii": list(self.self_sufficient),
            "components": [list(c) for c in self.components],
        }


def validate(net: EpidemicNetwork) -> ValidationReport:
    """Connectivity, R0 and the nodes with ``d_i > b_ii``; never raises."""
    r0 = net.r0()
    comps = tuple(tuple(c) for c in scc(net.b))
    local = tuple(i for i in range(net.n) if net.d[i] > net.b[i, i])
    return ValidationReport(len(comps) == 1, r0, r0 > 1.0, local, comps)


@dataclass(frozen=True, eq=False)
class Partition:
    """Reordering of the nodes into uncontrolled ``U`` then controlled ``C``."""

    net: EpidemicNetwork
    uncontrolled: tuple[int, ...]
    controlled: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.uncontrolled)

    @property
    def order(self) -> np.ndarray:
        return np.array(self.uncontrolled + self.controlled, dtype=int)

    def _block(self, rows, cols) -> np.ndarray:
        return self.net.b[np.ix_(list(rows), list(cols))]

    @property
    def B11(self) -> np.ndarray:
        return self._block(self.uncontrolled, self.uncontrolled)

    @property
    def B12(self) -> np.ndarray:
        return self._block(self.uncontrolled, self.controlled)

    @property
    def B21(self) -> np.ndarray:
        return self._block(self.controlled, self.uncontrolled)

    @property
    def B22(self) -> np.ndarray:
        return self._block(self.controlled, self.controlled)

    @property
    def D1(self) -> np.ndarray:
        return np.diag(self.net.d[list(self.uncontrolled)])

    @property
    def D2(self) -> np.ndarray:
        return np.diag(self.net.d[list(self.controlled)])

    def uncontrolled_matrix(self) -> np.ndarray:
        """``-D1 + B11``, the matrix whose stability decides elimination."""
        return -self.D1 + self.B11

    def reordered(self) -> tuple[np.ndarray, np.ndarray]:
        o = self.order
        return self.net.d[o], self.net.b[np.ix_(o, o)]

    def reassemble(self) -> tuple[np.ndarray, np.ndarray]:
        """Blocks put back in original node order."""
        n = self.net.n
        d = np.concatenate([np.diag(self.D1), np.diag(self.D2)])
        b = np.block([[self.B11, self.B12], [self.B21, self.B22]])
        inv = np.empty(n, dtype=int)
        inv[self.order] = np.arange(n)
        return d[inv], b[np.ix_(inv, inv)]


def partition(net: EpidemicNetwork, controlled) -> Partition:
    c = sorted({net.index(i) for i in controlled})
    u = [i for i in range(net.n) if i not in set(c)]
    return Partition(net, tuple(u), tuple(c))


def normalize_and_threshold(raw, kappa: float, target_row_sum: float = 2.0) -> np.ndarray:
    """Zero entries below ``kappa`` then scale every row to ``target_row_sum``."""
    a = np.array(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NetworkError(f"expected a square matrix, got shape {a.shape}")
    if np.any(~(a > 0)):
        raise NetworkError("raw matrix must be strictly positive")
    if kappa < 0:
        raise NetworkError("threshold must be nonnegative")
    a[a < kappa] = 0.0
    sums = a.sum(axis=1)
    empty = np.flatnonzero(sums == 0)
    if empty.size:
        raise NetworkError(
            f"threshold {kappa} removes every entry of row(s) {empty.tolist()}; "
            f"node {int(empty[0])} becomes a disconnected component"
        )
    a *= (target_row_sum / sums)[:, None]
    comps = scc(a)
    if len(comps) > 1:
        small = min(comps, key=len)
        raise NetworkError(
            f"threshold {kappa} destroys strong connectivity: {len(comps)} components, "
            f"e.g. component {small}"
        )
    return a


# ---------------------------------------------------------------------------
# file I/O

def save_network(net: EpidemicNetwork, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(net.to_dict(), indent=1) + "\n")
    return path


def load_network(path, format: str | None = None, nodes_path=None) -> EpidemicNetwork:
    """Read a dense JSON network or a CSV edge list plus node file.

    The edge list has header ``src,dst,weight`` (edge ``src -> dst`` sets
    ``b[dst, src]``); the node file has header ``node,d``.  Node ids are
    0-based indices or labels listed in the node file.  The default node
    file for ``edges.csv`` is ``edges_nodes.csv``.
    """
    path = Path(path)
    if format is None:
        format = "edge_csv" if path.suffix.lower() == ".csv" else "json"
    if format == "json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise NetworkError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc
        return network_from_dict(data)
    if format == "edge_csv":
        nodes_path = Path(nodes_path) if nodes_path else path.with_name(path.stem + "_nodes.csv")
        return _load_edge_csv(path, nodes_path)
    raise NetworkError(f"unknown network format {format!r}")


def network_from_dict(data: dict) -> EpidemicNetwork:
    try:
        d = np.asarray(data["d"], dtype=float)
        rows = data["b"]
        if any(len(r) != len(rows) for r in rows):
            bad = next(i for i, r in enumerate(rows) if len(r) != len(rows))
            raise NetworkError(f"dimension mismatch: row {bad} of b has {len(rows[bad])} entries")
        b = np.asarray(rows, dtype=float).reshape(len(rows), len(rows))
    except KeyError as exc:
        raise NetworkError(f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, NetworkError):
            raise
        raise NetworkError(f"parse error: {exc}") from exc
    if "n" in data and int(data["n"]) != d.size:
        raise NetworkError(f"dimension mismatch: n = {data['n']} but d has length {d.size}")
    return EpidemicNetwork(d, b, data.get("labels"))


def _load_edge_csv(edges_path: Path, nodes_path: Path) -> EpidemicNetwork:
    if not nodes_path.exists():
        raise NetworkError(f"node file {nodes_path} not found")
    with nodes_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"node", "d"} <= set(reader.fieldnames):
            raise NetworkError(f"{nodes_path}: header must contain node,d")
        ids, ds = [], []
        for lineno, row in enumerate(reader, start=2):
            ids.append(row["node"].strip())
            try:
                ds.append(float(row["d"]))
            except ValueError as exc:
                raise NetworkError(f"{nodes_path}:{lineno}: bad d value {row['d']!r}") from exc
    n = len(ids)
    numeric = all(s.isdigit() for s in ids) and sorted(int(s) for s in ids) == list(range(n))
    if numeric:
        order = [int(s) for s in ids]
        d = np.empty(n)
        d[order] = ds
        labels = None
        lookup = {str(i): i for i in range(n)}
    else:
        if len(set(ids)) != n:
            raise NetworkError(f"{nodes_path}: duplicate node labels")
        d = np.asarray(ds)
        labels = ids
        lookup = {s: i for i, s in enumerate(ids)}

    b = np.zeros((n, n))
    seen = set()
    with edges_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"src", "dst", "weight"} <= set(reader.fieldnames):
            raise NetworkError(f"{edges_path}: header must be src,dst,weight")
        for lineno, row in enumerate(reader, start=2):
            src, dst = row["src"].strip(), row["dst"].strip()
            if src not in lookup or dst not in lookup:
                raise NetworkError(f"{edges_path}:{lineno}: unknown node in edge {src}->{dst}")
            try:
                w = float(row["weight"])
            except ValueError as exc:
                raise NetworkError(f"{edges_path}:{lineno}: parse error in weight {row['weight']!r}") from exc
            if w < 0:
                raise NetworkError(
                    f"{edges_path}:{lineno}: negative entry {w} at row {lookup[dst]}, column {lookup[src]}"
                )
            key = (lookup[dst], lookup[src])
            if key in seen:
                raise NetworkError(f"{edges_path}:{lineno}: duplicate edge {src}->{dst}")
            seen.add(key)
            b[key] = w
    return EpidemicNetwork(d, b, labels)


def save_edge_csv(net: EpidemicNetwork, path) -> tuple[Path, Path]:
    path = Path(path)
    nodes_path = path.with_name(path.stem + "_nodes.csv")
    with nodes_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "d"])
        for i in range(net.n):
            w.writerow([net.name(i), repr(float(net.d[i]))])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst", "weight"])
        for i, j in np.argwhere(net.b > 0):
            w.writerow([net.name(j), net.name(i), repr(float(net.b[i, j]))])
    return path, nodes_path


# ---------------------------------------------------------------------------
# built-in scenarios

TOY6_LABELS = ("a", "b", "c", "d", "e", "f")
TOY6_WEIGHT = 0.9
# reconstructed edge set (src, dst); see README for the rationale
TOY6_EDGES = (
    ("a", "b"),
    ("b", "c"),
    ("c", "e"),
    ("e", "d"),
    ("d", "c"),
    ("e", "f"),
    ("f", "e"),
    ("f", "a"),
)


def toy6(weight: float = TOY6_WEIGHT) -> EpidemicNetwork:
    """Six-node example: d_i = 2, self-loops 1 except node a (4)."""
    b = _toy6_matrix(weight)
    return EpidemicNetwork(np.full(6, 2.0), b.astype(float), TOY6_LABELS)


def _toy6_matrix(weight, one=1):
    idx = {s: i for i, s in enumerate(TOY6_LABELS)}
    b = np.zeros((6, 6), dtype=object)
    b[:, :] = 0 * one
    for i in range(6):
        b[i, i] = 4 * one if i == 0 else one
    for src, dst in TOY6_EDGES:
        b[idx[dst], idx[src]] = weight
    return b


def toy6_exact():
    """``(d, b)`` of toy6 as object arrays of :class:`fractions.Fraction`."""
    from fractions import Fraction

    b = _toy6_matrix(Fraction(9, 10), Fraction(1))
    d = np.array([Fraction(2)] * 6, dtype=object)
    return d, b


def random_sc(n: int, density: float = 0.3, seed: int = 0) -> EpidemicNetwork:
    """Seeded strongly connected network.

    A directed Hamiltonian cycle over a random node permutation guarantees
    strong connectivity; every other ordered pair gets an edge with
    probability ``density``, as does each self-loop.  Weights are uniform on
    [0.1, 1], recovery rates uniform on [0.5, 1.5].
    """
    if n < 2:
        raise NetworkError("random_sc needs n >= 2")
    if not 0 <= density <= 1:
        raise NetworkError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    mask = rng.random((n, n)) < density
    for k in range(n):
        src, dst = perm[k], perm[(k + 1) % n]
        mask[dst, src] = True
    b = np.where(mask, rng.uniform(0.1, 1.0, size=(n, n)), 0.0)
    d = rng.uniform(0.5, 1.5, size=n)
    return EpidemicNetwork(d, b)


def italy_like(seed: int = 0, n: int = 107, target_row_sum: float = 2.0) -> EpidemicNetwork:
    """Synthetic stand-in for a province mobility network.

    Log-uniform positive raw weights spanning four decades, thresholded at
    their 40th percentile and row-normalised; ``D = I``.
    """
    rng = np.random.default_rng(seed)
    raw = 10.0 ** rng.uniform(-4.0, 0.0, size=(n, n))
    kappa = float(np.percentile(raw, 40))
    b = normalize_and_threshold(raw, kappa, target_row_sum)
    return EpidemicNetwork(np.ones(n), b, require_strong_connectivity=True)


def scalar(d: float, b: float) -> EpidemicNetwork:
    return EpidemicNetwork([d], [[b]])


def scale_to_r0(net: EpidemicNetwork, target: float) -> EpidemicNetwork:
    """Rescale ``b`` so that ``rho(D^-1 B)`` equals ``target``."""
    return net.with_b(net.b * (target / net.r0()))


def builtin_scenario(name: str, **kwargs) -> EpidemicNetwork:
    """``toy6``, ``italy_like`` (seed) or ``random_sc`` (n, density, seed)."""
    if name == "toy6":
        return toy6()
    if name == "italy_like":
        return italy_like(**kwargs)
    if name == "random_sc":
        return random_sc(**kwargs)
    raise NetworkError(f"unknown scenario {name!r}")


def parse_scenario(text: str) -> EpidemicNetwork:
    """Parse ``name[:k=v,...]`` strings such as ``random_sc:n=10,density=0.3,seed=7``."""
    name, _, rest = text.partition(":")
    kwargs = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        kwargs[key.strip()] = float(val) if key.strip() == "density" else int(val)
    return builtin_scenario(name, **kwargs)


def node_indices(net: EpidemicNetwork, keys: Sequence) -> list[int]:
    return sorted({net.index(k) for k in keys})
