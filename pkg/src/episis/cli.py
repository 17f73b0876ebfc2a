"""Command-line entry point: ``episis simulate|select|analyze|verify|scenario export``.

Exit codes: 0 success, 2 configuration error, 3 integration failure,
4 an enabled check failed, 5 no feasible partial-control set.

Seeding: the run seed feeds ``numpy.random.SeedSequence(seed).spawn(3)``;
child 0 draws the initial infection, child 1 the gain rates, child 2 the
tie-breaks of node selection.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import svgplot
from .dynamics import MODES, ConfigError, ControlConfig
from .integrator import IntegrationError, Trajectory, integrate
from .network import (
    EpidemicNetwork,
    NetworkError,
    load_network,
    node_indices,
    parse_scenario,
    save_edge_csv,
    save_network,
    validate,
)
from .selection import select
from .spectral import classify_m_matrix
from .verify import BoundReport, VerificationError, limiting_reproduction_number, run_checks

EXIT_OK, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_CHECKS, EXIT_INFEASIBLE = 0, 2, 3, 4, 5
SCENARIOS = ("toy6", "italy_like", "random_sc")
SEED_STREAMS = ("x0", "alpha", "tie_break")


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(SEED_STREAMS))
    return {name: np.random.default_rng(c) for name, c in zip(SEED_STREAMS, children)}


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one simulation.

    ``alpha`` is a number, a per-node list or ``{"uniform": [lo, hi]}``;
    ``x0`` is a number (every node), a per-node list or
    ``{"num_seeds": k, "range": [lo, hi]}``.  ``controlled = None`` means
    every node is controlled.
    """

    network: str
    mode: str = "infection"
    alpha: Any = 1.0
    p: int = 1
    period: float | None = None
    controlled: list | None = None
    x0: Any = 0.5
    seed: int = 0
    horizon: float = 1e4
    step: float = 1e-2
    output: str | None = None
    checks: list = field(default_factory=lambda: ["all"])
    samples: int = 200
    g_floor: float = 1e-6

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict, base: Path | None = None) -> "RunManifest":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown manifest keys: {extra}")
        if "network" not in data:
            raise ConfigError("manifest needs a 'network' entry")
        data = dict(data)
        net = str(data["network"])
        if base is not None and not _is_scenario(net) and not Path(net).is_absolute():
            data["network"] = str(base / net)
        return cls(**data)

    def run_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _is_scenario(source: str) -> bool:
    return source.partition(":")[0] in SCENARIOS


def resolve_network(source: str) -> EpidemicNetwork:
    """A file path, or a built-in scenario such as ``random_sc:n=8,seed=3``."""
    if _is_scenario(source) and not Path(source).exists():
        return parse_scenario(source)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"network file not found: {source}")
    return load_network(path)


def build_config(m: RunManifest, net: EpidemicNetwork, rngs) -> ControlConfig:
    if m.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if m.mode == "uncontrolled":
        return ControlConfig.uncontrolled(net.n)
    a = m.alpha
    if isinstance(a, dict):
        lo, hi = a.get("uniform", (None, None))
        if lo is None or not 0 < lo <= hi:
            raise ConfigError("alpha must be {'uniform': [lo, hi]} with 0 < lo <= hi")
        alpha = rngs["alpha"].uniform(lo, hi, size=net.n)
    else:
        alpha = np.broadcast_to(np.asarray(a, dtype=float), (net.n,)).copy()
    if m.controlled is not None:
        try:
            keep = node_indices(net, m.controlled)
        except (KeyError, IndexError) as exc:
            raise ConfigError(f"controlled set: {exc}") from exc
        mask = np.zeros(net.n, dtype=bool)
        mask[keep] = True
        alpha[~mask] = 0.0
        if np.any(alpha[mask] <= 0):
            raise ConfigError("controlled nodes need alpha > 0")
        return ControlConfig(m.mode, alpha, m.p, m.period)
    return ControlConfig.full(m.mode, alpha, m.p, m.period)


def build_x0(m: RunManifest, net: EpidemicNetwork, rngs) -> np.ndarray:
    x0_spec = m.x0
    if isinstance(x0_spec, dict):
        k = int(x0_spec.get("num_seeds", 0))
        lo, hi = x0_spec.get("range", (0.2, 0.7))
        if not (1 <= k <= net.n) or not (0 <= lo <= hi <= 1):
            raise ConfigError("x0 needs 1 <= num_seeds <= n and 0 <= lo <= hi <= 1")
        rng = rngs["x0"]
        nodes = rng.choice(net.n, size=k, replace=False)
        x0 = np.zeros(net.n)
        x0[np.sort(nodes)] = rng.uniform(lo, hi, size=k)
        return x0
    x0 = np.asarray(x0_spec, dtype=float)
    if x0.ndim == 0:
        x0 = np.full(net.n, float(x0))
    if x0.shape != (net.n,) or np.any((x0 < 0) | (x0 > 1)):
        raise ConfigError(f"x0 must be {net.n} values in [0, 1]")
    return x0


# ---------------------------------------------------------------------------
# artifacts

def write_trajectory_csv(traj: Trajectory, path: Path) -> None:
    n = traj.n
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + [f"g_{i + 1}" for i in range(n)])
        for t, x, g in zip(traj.times, traj.x, traj.g):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in g])


def read_trajectory_csv(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = (len(header) - 1) // 2
    if len(header) != 1 + 2 * n:
        raise ConfigError(f"{path}: expected 1 + 2n columns, got {len(header)}")
    return body[:, 0], body[:, 1:1 + n], body[:, 1 + n:]


def _dump(obj, path: Path | None = None) -> str:
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        path.write_text(text)
    return text


def summarize(traj: Trajectory, net: EpidemicNetwork, cfg: ControlConfig,
              reports: list[BoundReport], m: RunManifest) -> dict:
    return {
        "terminal": traj.terminal,
        "peak_avg_infection": traj.peak_avg_infection,
        "r0": net.r0(),
        "r_infinity": limiting_reproduction_number(net, cfg, traj.final_gains),
        "final_gains": traj.final_gains.tolist(),
        "bound_checks": [r.to_dict() for r in reports],
        "passed": all(r.passed for r in reports),
        "x_limit": traj.x_limit.tolist(),
        "converged": traj.converged,
        "t_extinct": traj.t_extinct,
        "max_clamp": traj.max_clamp,
        "step": traj.step,
        "horizon": traj.horizon,
        "control": cfg.to_dict(),
        "network": net.to_dict(),
        "run_hash": m.run_hash(),
    }


def write_plots(traj: Trajectory, net: EpidemicNetwork, out: Path) -> None:
    names = [net.name(i) for i in range(net.n)]
    t = traj.times
    plots = {
        "avg_infection.svg": ([("mean x", t, traj.avg_infection)], "Average infection", "fraction infected"),
        "infection.svg": ([(names[i], t, traj.x[:, i]) for i in range(net.n)], "Infection by node", "x_i"),
        "gains.svg": ([(names[i], t, traj.g[:, i]) for i in range(net.n)], "Adaptive gains", "g_i"),
        "r_t.svg": ([("R_t", traj.r_t_times, traj.r_t)], "Reproduction number", "R_t"),
    }
    for fname, (series, title, ylabel) in plots.items():
        (out / fname).write_text(svgplot.line_chart(series, title, "t", ylabel))


def execute(m: RunManifest, out: Path) -> int:
    """Run one manifest and write its artifacts into ``out``."""
    try:
        net = resolve_network(m.network)
        rngs = seed_streams(m.seed)
        cfg = build_config(m, net, rngs)
        x0 = build_x0(m, net, rngs)
    except (ConfigError, NetworkError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        traj = integrate(net, cfg, x0, m.horizon, m.step, samples=m.samples)
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    reports = _enabled(run_checks(traj, net, cfg, m.g_floor), m.checks)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, out / "trajectory.csv")
    with (out / "r_t.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "r_t"])
        for t, r in zip(traj.r_t_times, traj.r_t):
            w.writerow([repr(float(t)), repr(float(r))])
    _dump(summarize(traj, net, cfg, reports, m), out / "summary.json")
    _dump(m.to_dict(), out / "manifest.json")
    write_plots(traj, net, out)

    failed = [r.tag for r in reports if not r.passed]
    print(f"{out}: terminal={traj.terminal} peak_avg_infection={traj.peak_avg_infection:.6g}"
          + (f" FAILED {failed}" if failed else ""))
    return EXIT_CHECKS if failed else EXIT_OK


def _enabled(reports: list[BoundReport], checks) -> list[BoundReport]:
    if not checks or "all" in checks:
        return reports
    return [r for r in reports if r.tag in checks]


def _run_one(args: tuple[dict, str]) -> tuple[str, int]:
    data, out = args
    m = RunManifest.from_dict(data)
    return m.run_hash(), execute(m, Path(out) / m.run_hash())


def execute_batch(runs: list[RunManifest], out: Path, jobs: int) -> int:
    """Independent runs in worker processes, each under ``out/<run hash>``."""
    out.mkdir(parents=True, exist_ok=True)
    work = [(m.to_dict(), str(out)) for m in runs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, work))
    else:
        results = [_run_one(w) for w in work]
    _dump({key: code for key, code in sorted(results)}, out / "batch.json")
    return max(code for _, code in results)


# ---------------------------------------------------------------------------
# subcommands

def _out_dir(arg: str | None, manifest_out: str | None = None) -> Path | None:
    chosen = arg or manifest_out or os.environ.get("EPISIS_OUT_DIR")
    return Path(chosen) if chosen else None


def _parse_list(text: str | None):
    if text is None:
        return None
    items = [s.strip() for s in text.split(",") if s.strip()]
    return [int(s) if s.lstrip("-").isdigit() else s for s in items]


def _parse_numbers(text: str):
    vals = [float(s) for s in text.split(",")]
    return vals[0] if len(vals) == 1 else vals


def cmd_simulate(args) -> int:
    runs: list[RunManifest] = []
    manifest_out = None
    try:
        if args.manifest:
            mpath = Path(args.manifest)
            if not mpath.exists():
                raise ConfigError(f"manifest not found: {mpath}")
            try:
                data = json.loads(mpath.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{mpath}: parse error at line {exc.lineno}: {exc.msg}") from exc
            base = mpath.parent
            if "runs" in data:
                shared = data.get("defaults", {})
                manifest_out = data.get("output")
                runs = [RunManifest.from_dict({**shared, **r}, base) for r in data["runs"]]
            else:
                runs = [RunManifest.from_dict(data, base)]
                manifest_out = runs[0].output
        else:
            if not args.net:
                raise ConfigError("simulate needs --net or --manifest")
            runs = [RunManifest(network=args.net)]
        overrides = {}
        if args.net and args.manifest:
            overrides["network"] = args.net
        for key in ("mode", "p", "period", "seed", "horizon", "step"):
            val = getattr(args, key)
            if val is not None:
                overrides[key] = val
        if args.controlled is not None:
            overrides["controlled"] = _parse_list(args.controlled)
        if args.alpha is not None:
            overrides["alpha"] = _parse_numbers(args.alpha)
        if args.x0 is not None:
            overrides["x0"] = _parse_numbers(args.x0)
        if args.checks is not None:
            overrides["checks"] = _parse_list(args.checks)
        runs = [RunManifest(**{**r.to_dict(), **overrides}) for r in runs]
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = _out_dir(args.out, manifest_out)
    if out is None:
        print("config error: no output directory (use --out or EPISIS_OUT_DIR)", file=sys.stderr)
        return EXIT_CONFIG
    if len(runs) > 1:
        return execute_batch(runs, out, args.jobs)
    return execute(runs[0], out)


def cmd_select(args) -> int:
    try:
        net = resolve_network(args.net)
    except (ConfigError, NetworkError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is None:
        res = select(net)
    else:
        res = select(net, "seeded", seed_streams(args.seed)["tie_break"])
    report = res.to_dict(net, explain=args.explain)
    text = _dump(report)
    out = _out_dir(args.out)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "selection.json").write_text(text)
    sys.stdout.write(text)
    if not res.feasible:
        print("infeasible: no node has d_i > b_ii, so any proper controlled set leaves an "
              "uncontrolled block that cannot be Hurwitz", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def analyze_network(net: EpidemicNetwork) -> dict:
    rep = validate(net)
    m_class = classify_m_matrix(np.diag(net.d) - net.b)
    return {
        "n": net.n,
        "r0": rep.r0,
        "strongly_connected": rep.strongly_connected,
        "components": [[net.name(i) for i in c] for c in rep.components],
        "m_matrix_class_of_D_minus_B": m_class.value,
        "nodes": [
            {"node": net.name(i), "d": float(net.d[i]), "b_ii": float(net.b[i, i]),
             "d_gt_bii": bool(net.d[i] > net.b[i, i])}
            for i in range(net.n)
        ],
        "verdict": "disease dies out uncontrolled" if rep.r0 <= 1 else "endemic without control",
    }


def cmd_analyze(args) -> int:
    try:
        net = resolve_network(args.net)
    except (ConfigError, NetworkError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = _dump(analyze_network(net))
    out = _out_dir(args.out)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "analysis.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def load_run(run_dir: Path) -> tuple[Trajectory, EpidemicNetwork, ControlConfig, dict]:
    """Rebuild a trajectory from a simulate output directory (gains taken from the summary)."""
    summary = json.loads((run_dir / "summary.json").read_text())
    times, x, g = read_trajectory_csv(run_dir / "trajectory.csv")
    net = EpidemicNetwork(summary["network"]["d"], summary["network"]["b"],
                          summary["network"].get("labels"))
    cfg = ControlConfig.from_dict(summary["control"])
    traj = Trajectory(
        times=times, x=x, g=g,
        r_t_times=np.array([]), r_t=np.array([]),
        peak_avg_infection=summary["peak_avg_infection"],
        terminal=summary["terminal"],
        t_extinct=summary["t_extinct"],
        max_clamp=summary["max_clamp"],
        step=summary["step"],
        horizon=summary["horizon"],
        mode=cfg.mode,
        final_gains=np.asarray(summary["final_gains"], dtype=float),
        x_limit=np.asarray(summary["x_limit"], dtype=float),
        converged=summary["converged"],
    )
    return traj, net, cfg, summary


def cmd_verify(args) -> int:
    run_dir = Path(args.run_dir)
    try:
        traj, net, cfg, summary = load_run(run_dir)
    except (OSError, KeyError, ValueError) as exc:
        print(f"config error: cannot read run in {run_dir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        reports = run_checks(traj, net, cfg)
    except VerificationError as exc:
        print(f"check error: {exc}", file=sys.stderr)
        return EXIT_CHECKS
    manifest_checks = None
    mpath = run_dir / "manifest.json"
    if mpath.exists():
        manifest_checks = json.loads(mpath.read_text()).get("checks")
    reports = _enabled(reports, manifest_checks)
    passed = all(r.passed for r in reports)
    sys.stdout.write(_dump({"passed": passed, "bound_checks": [r.to_dict() for r in reports]}))
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.tag}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_CHECKS


def cmd_scenario_export(args) -> int:
    try:
        net = parse_scenario(args.name)
    except (NetworkError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else _out_dir(None)
    if out is None:
        print("config error: no output path", file=sys.stderr)
        return EXIT_CONFIG
    if out.suffix == "" or out.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        stem = args.name.partition(":")[0]
        out = out / (stem + (".csv" if args.format == "edge_csv" else ".json"))
    if args.format == "edge_csv":
        paths = save_edge_csv(net, out)
        print(" ".join(str(p) for p in paths))
    else:
        print(save_network(net, out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="episis", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a controlled epidemic and write artifacts")
    sim.add_argument("--net", help="network file or scenario (toy6, italy_like:seed=1, random_sc:n=8,seed=3)")
    sim.add_argument("--manifest", help="run manifest JSON (a single run or {'runs': [...]})")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out")
    sim.add_argument("--horizon", type=float)
    sim.add_argument("--step", type=float)
    sim.add_argument("--mode", choices=MODES)
    sim.add_argument("--p", type=int)
    sim.add_argument("--period", type=float, metavar="T")
    sim.add_argument("--controlled", metavar="i,j,k")
    sim.add_argument("--alpha", help="one rate or comma-separated per-node rates")
    sim.add_argument("--x0", help="one level or comma-separated per-node levels")
    sim.add_argument("--checks", help="comma-separated check tags (default all)")
    sim.add_argument("--jobs", type=int, default=1, help="worker processes for batch manifests")
    sim.set_defaults(func=cmd_simulate)

    sel = sub.add_parser("select", help="choose controlled nodes")
    sel.add_argument("--net", required=True)
    sel.add_argument("--seed", type=int, help="seeded tie-breaking instead of the deterministic rule")
    sel.add_argument("--explain", action="store_true", help="include cycle reports per component")
    sel.add_argument("--out")
    sel.set_defaults(func=cmd_select)

    ana = sub.add_parser("analyze", help="R0, connectivity and M-matrix class of a network")
    ana.add_argument("--net", required=True)
    ana.add_argument("--out")
    ana.set_defaults(func=cmd_analyze)

    ver = sub.add_parser("verify", help="re-run bound checks on a simulate output directory")
    ver.add_argument("run_dir")
    ver.set_defaults(func=cmd_verify)

    scen = sub.add_parser("scenario", help="built-in networks")
    scen_sub = scen.add_subparsers(dest="scenario_command", required=True)
    exp = scen_sub.add_parser("export", help="write a built-in network to disk")
    exp.add_argument("name")
    exp.add_argument("--out")
    exp.add_argument("--format", choices=("json", "edge_csv"), default="json")
    exp.set_defaults(func=cmd_scenario_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
