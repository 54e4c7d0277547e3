"""Command-line entry point: solve / oracle / validate / simulate / table.

Every subcommand takes ``--config PATH`` (JSON run configuration), an
optional ``--out DIR`` override, repeatable ``--probe "t,x"`` points and a
``--strict/--no-strict`` toggle for unknown-key rejection.  Exit code 0 means
every configured tolerance passed; module errors print a structured JSON
object on stderr and exit nonzero.  ``GROBUST_THREADS`` caps worker
parallelism for independent sub-runs (0 or unset = auto).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis import OracleResult, mc_lower_bound, oracle_probe_value
from .config import RunConfig, load_config, resolve_problem
from .grids import Grid1D, ValueField, write_field_csv
from .hjb import SchemeParams, hjb_time_stepping, solve_hjb
from .lattice import brute_force_value, solve_dpp, solve_dpp_tree
from .problem import ControlProblem

__all__ = ["main", "run", "emit_convergence_table", "worker_count", "ExitReport"]

_ORACLE_METHOD = {"bsb-convex": "bs-closed-form", "bsb-concave": "bs-closed-form",
                  "lq-riccati": "riccati"}


def worker_count() -> int:
    """Worker cap from GROBUST_THREADS (0 or unset means auto)."""
    raw = os.environ.get("GROBUST_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        return os.cpu_count() or 1
    return n


@dataclass(frozen=True)
class ExitReport:
    passed: bool
    messages: Tuple[str, ...]
    artifacts: Tuple[str, ...]


def _default_probes(problem: ControlProblem) -> Tuple[Tuple[float, float], ...]:
    return ((0.0, 0.5 * (problem.x_min + problem.x_max)),)


def _lattice_k(cfg: RunConfig, n_x: int) -> int:
    if cfg.solver.K is not None:
        base_nx = cfg.solver.n_x
        return max(1, round(cfg.solver.K * n_x / base_nx))
    return n_x


def _solve_one(cfg: RunConfig, problem: ControlProblem, name: str,
               method: str, n_x: int, probes) -> Tuple[ValueField, Dict]:
    grid = Grid1D.for_problem(problem, n_x)
    start = time.perf_counter()
    if method == "lattice":
        K = _lattice_k(cfg, n_x)
        field = solve_dpp(problem, grid, K, n_q=cfg.solver.n_q,
                          u_grid=None if cfg.solver.n_u is None else
                          np.linspace(problem.u_min, problem.u_max,
                                      cfg.solver.n_u))
        info = {"problem": name, "method": "lattice", "n_x": n_x, "K": K,
                "n_u": int(cfg.solver.n_u or problem.n_u),
                "n_q": cfg.solver.n_q, "dt": field.dt}
    elif method == "hjb":
        sp = SchemeParams(grid=grid, cfl_theta=cfg.solver.cfl_theta,
                          n_t_out=_lattice_k(cfg, n_x), dt=cfg.solver.dt,
                          n_u=cfg.solver.n_u)
        k_out, m_sub, dt_int, bound = hjb_time_stepping(problem, sp)
        field = solve_hjb(problem, sp)
        info = {"problem": name, "method": "hjb", "n_x": n_x, "K": k_out,
                "n_u": int(cfg.solver.n_u or problem.n_u),
                "substeps_per_row": m_sub, "dt": dt_int, "cfl_bound": bound,
                "cfl_theta": cfg.solver.cfl_theta}
    else:
        raise ValueError(f"unknown method {method!r}")
    wall = time.perf_counter() - start
    info["wall_time"] = wall
    info["V_at_probe_points"] = [
        {"t": t, "x": x, "value": field.value_at(t, x)} for t, x in probes]
    return field, info


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _oracle_points(tag: str, problem: ControlProblem, probes) -> OracleResult:
    pts = tuple({"t": t, "x": x,
                 "value": oracle_probe_value(tag, problem, t, x)}
                for t, x in probes)
    return OracleResult(name=tag, method=_ORACLE_METHOD.get(tag, tag),
                        points=pts)


def emit_convergence_table(rows: Sequence[Dict], buf) -> None:
    """CSV of per-resolution probe values, oracle gaps and fitted rates.

    ``rows`` carry n_x, K, probe coordinates, solver values and diffs; rates
    are fitted from consecutive resolutions (blank for the first row or a
    single-resolution table).
    """
    header = ("n_x,K,probe_t,probe_x,lattice,hjb,oracle,"
              "diff_to_oracle,diff_lattice_vs_hjb,rate")
    buf.write(header + "\n")
    by_probe: Dict[Tuple[float, float], List[Dict]] = {}
    for row in rows:
        by_probe.setdefault((row["probe_t"], row["probe_x"]), []).append(row)
    for _, group in sorted(by_probe.items()):
        group.sort(key=lambda r: r["n_x"])
        for i, row in enumerate(group):
            rate = ""
            if i > 0 and row.get("diff_to_oracle") is not None \
                    and group[i - 1].get("diff_to_oracle") is not None:
                d0, d1 = group[i - 1]["diff_to_oracle"], row["diff_to_oracle"]
                if d0 > 0 and d1 > 0:
                    rate = f"{math.log(d0 / d1) / math.log(row['n_x'] / group[i - 1]['n_x']):.17g}"

            def fmt(key):
                v = row.get(key)
                return "" if v is None else f"{v:.17g}"

            buf.write(
                f"{row['n_x']},{row['K']},{row['probe_t']:.17g},"
                f"{row['probe_x']:.17g},{fmt('lattice')},{fmt('hjb')},"
                f"{fmt('oracle')},{fmt('diff_to_oracle')},"
                f"{fmt('diff_lattice_vs_hjb')},{rate}\n")


def _comparison_rows(probes, fields: Dict[str, ValueField],
                     oracle_tag: str, problem: ControlProblem) -> List[Dict]:
    rows = []
    for t, x in probes:
        lat = fields.get("lattice")
        hjb = fields.get("hjb")
        row: Dict = {"t": t, "x": x,
                     "lattice": lat.value_at(t, x) if lat else None,
                     "hjb": hjb.value_at(t, x) if hjb else None,
                     "oracle": (oracle_probe_value(oracle_tag, problem, t, x)
                                if oracle_tag != "none" else None)}
        for a, b, key in (("lattice", "oracle", "diff_lattice_oracle"),
                          ("hjb", "oracle", "diff_hjb_oracle"),
                          ("lattice", "hjb", "diff_lattice_hjb")):
            va, vb = row[a], row[b]
            row[key] = abs(va - vb) if va is not None and vb is not None else None
        rows.append(row)
    return rows


def _write_comparison_csv(path: str, rows: Sequence[Dict]) -> None:
    cols = ("t", "x", "lattice", "hjb", "oracle", "diff_lattice_oracle",
            "diff_hjb_oracle", "diff_lattice_hjb")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            cells = ["" if row[c] is None else f"{row[c]:.17g}" for c in cols]
            fh.write(",".join(cells) + "\n")


def run(cfg: RunConfig, mode: str = "validate",
        out_dir: Optional[str] = None,
        probes: Optional[Sequence[Tuple[float, float]]] = None) -> ExitReport:
    """Execute one configured run; see the module docstring for modes."""
    problem, name, oracle_tag = resolve_problem(cfg)
    out = out_dir or cfg.output.dir
    os.makedirs(out, exist_ok=True)
    probes = tuple(probes) if probes else (cfg.probes or _default_probes(problem))
    methods = (("lattice", "hjb") if cfg.solver.method == "both"
               else (cfg.solver.method,))
    messages: List[str] = []
    artifacts: List[str] = []
    passed = True

    if mode == "oracle":
        if oracle_tag == "none":
            return ExitReport(False, ("no oracle tag configured",), ())
        res = _oracle_points(oracle_tag, problem, probes)
        path = os.path.join(out, f"{name}_oracle.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(res.to_json() + "\n")
        return ExitReport(True, (f"oracle {oracle_tag} evaluated",), (path,))

    if mode == "simulate":
        if cfg.simulate is None:
            return ExitReport(False, ("no simulate block configured",), ())
        sim = cfg.simulate
        x0 = probes[0][1]
        res = mc_lower_bound(problem, x0, sim.u_policy, sim.q_profile,
                             sim.n_paths, _lattice_k(cfg, cfg.solver.n_x),
                             sim.seed)
        path = os.path.join(out, f"{name}_mc.json")
        _write_json(path, {"problem": name, "x0": x0, "mean": res.mean,
                           "stderr": res.stderr, "n_paths": res.n_paths,
                           "ci_low": res.ci_low, "ci_high": res.ci_high,
                           "seed": sim.seed,
                           "q_profile": list(sim.q_profile),
                           "u_policy": sim.u_policy})
        opath = os.path.join(out, f"{name}_mc_oracle.json")
        orec = OracleResult(
            name=f"{name}-scenario", method="mc-lower",
            points=({"t": 0.0, "x": x0, "value": res.mean,
                     "stderr": res.stderr},))
        with open(opath, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(orec.to_json() + "\n")
        return ExitReport(True, (f"mc mean {res.mean:.6g} +- {res.stderr:.2g}",),
                          (path, opath))

    if mode == "table":
        if cfg.table is None or not cfg.table.n_x_list:
            return ExitReport(False, ("no table block configured",), ())
        rows: List[Dict] = []

        def one_resolution(n_x: int):
            local: List[Dict] = []
            fields = {}
            for method in methods:
                field, _ = _solve_one(cfg, problem, name, method, n_x, probes)
                fields[method] = field
            for t, x in probes:
                lat = fields.get("lattice")
                hj = fields.get("hjb")
                lat_v = lat.value_at(t, x) if lat else None
                hj_v = hj.value_at(t, x) if hj else None
                orc = (oracle_probe_value(oracle_tag, problem, t, x)
                       if oracle_tag != "none" else None)
                primary = lat_v if lat_v is not None else hj_v
                local.append({
                    "n_x": n_x, "K": _lattice_k(cfg, n_x),
                    "probe_t": t, "probe_x": x,
                    "lattice": lat_v, "hjb": hj_v, "oracle": orc,
                    "diff_to_oracle": (abs(primary - orc)
                                       if orc is not None and primary is not None
                                       else None),
                    "diff_lattice_vs_hjb": (abs(lat_v - hj_v)
                                            if lat_v is not None and hj_v is not None
                                            else None),
                })
            return local

        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            for chunk in pool.map(one_resolution, cfg.table.n_x_list):
                rows.extend(chunk)
        path = os.path.join(out, f"{name}_convergence.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            emit_convergence_table(rows, fh)
        return ExitReport(True, (f"{len(rows)} table rows",), (path,))

    if mode == "validate" and "brute-force" in cfg.validate.oracles:
        # shallow-tree cross check: the DPP recursion on exact tree states
        # against exhaustive enumeration of adapted assignments
        depth = min(cfg.solver.K or 3, 4)
        n_u_bf = min(cfg.solver.n_u or problem.n_u, 3)
        rows = []
        for t, x in probes:
            if t != 0.0:
                raise ValueError("brute-force oracle probes must sit at t = 0")
            tree = solve_dpp_tree(problem, x, depth, n_u=n_u_bf)
            bf = brute_force_value(problem, x, depth, n_u_bf)
            rows.append({"t": t, "x": x, "lattice": tree, "hjb": None,
                         "oracle": bf, "diff_lattice_oracle": abs(tree - bf),
                         "diff_hjb_oracle": None, "diff_lattice_hjb": None})
        cpath = os.path.join(out, f"{name}_comparison.csv")
        _write_comparison_csv(cpath, rows)
        for row in rows:
            ok = row["diff_lattice_oracle"] <= cfg.validate.tolerance
            passed = passed and ok
            messages.append(
                f"{'PASS' if ok else 'FAIL'} tree-vs-brute-force at x="
                f"{row['x']}: {row['diff_lattice_oracle']:.3g} "
                f"(bound {cfg.validate.tolerance:g})")
        return ExitReport(passed, tuple(messages), (cpath,))

    # solve / validate
    fields: Dict[str, ValueField] = {}

    def solve_method(method: str):
        return method, _solve_one(cfg, problem, name, method,
                                  cfg.solver.n_x, probes)

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        for method, (field, info) in pool.map(solve_method, methods):
            fields[method] = field
            if "csv" in cfg.output.formats:
                fpath = os.path.join(out, f"{name}_{method}.csv")
                write_field_csv(field, fpath)
                artifacts.append(fpath)
            if "json" in cfg.output.formats:
                spath = os.path.join(out, f"{name}_{method}_summary.json")
                _write_json(spath, info)
                artifacts.append(spath)
            messages.append(
                f"{method}: V{probes[0]} = "
                f"{field.value_at(*probes[0]):.6g}")

    if mode == "solve":
        return ExitReport(True, tuple(messages), tuple(artifacts))

    # validate: comparison table + tolerance gates
    rows = _comparison_rows(probes, fields, oracle_tag, problem)
    cpath = os.path.join(out, f"{name}_comparison.csv")
    _write_comparison_csv(cpath, rows)
    artifacts.append(cpath)
    if oracle_tag != "none":
        ores = _oracle_points(oracle_tag, problem, probes)
        opath = os.path.join(out, f"{name}_oracle.json")
        with open(opath, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(ores.to_json() + "\n")
        artifacts.append(opath)

    tol = cfg.validate.tolerance
    agree = cfg.validate.agreement
    for row in rows:
        for key, bound in (("diff_lattice_oracle", tol),
                           ("diff_hjb_oracle", tol),
                           ("diff_lattice_hjb", agree)):
            v = row[key]
            if v is None:
                continue
            ok = v <= bound
            passed = passed and ok
            messages.append(
                f"{'PASS' if ok else 'FAIL'} {key} at (t={row['t']}, "
                f"x={row['x']}): {v:.3g} (bound {bound:g})")
    return ExitReport(passed, tuple(messages), tuple(artifacts))


def _parse_probe(text: str) -> Tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"probe must be 't,x', got {text!r}")
    return float(parts[0]), float(parts[1])


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="grobust",
        description="Robust control solvers under volatility uncertainty")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("solve", "oracle", "validate", "simulate", "table"):
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=None, help="artifact directory")
        sp.add_argument("--probe", action="append", type=_parse_probe,
                        default=None, metavar="t,x",
                        help="evaluation point, repeatable")
        strict = sp.add_mutually_exclusive_group()
        strict.add_argument("--strict", dest="strict", action="store_true",
                            default=True)
        strict.add_argument("--no-strict", dest="strict", action="store_false")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, strict=args.strict)
        report = run(cfg, mode=args.command, out_dir=args.out,
                     probes=args.probe)
    except Exception as exc:  # noqa: BLE001 - structured error reporting
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr, sort_keys=True)
        sys.stderr.write("\n")
        return 2
    for msg in report.messages:
        print(msg)
    for art in report.artifacts:
        print(f"wrote {art}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
