"""Command line entry point: ``pmkit analyze|simulate|monitor|report``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from ..core import GameSpecError, load_game_spec
from ..structure import analyze
from .monitor import monitor_experiment
from .runner import replicate, summarize


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SystemExit(f"error: no such file {path}") from None
    except json.JSONDecodeError as exc:
        raise SystemExit(f"error: cannot parse {path}: {exc}") from None


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2, ensure_ascii=False)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


def cmd_analyze(args) -> int:
    try:
        game = load_game_spec(args.game)
    except GameSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(analyze(game).to_dict(), args.out)
    return 0


def _write_curves(path: Path, records, stride: int) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "run", "round", "cum_regret"])
        for label, recs in records.items():
            for run, rec in enumerate(recs):
                T = rec.cum_regret.size
                rounds = sorted(set(range(stride, T + 1, stride)) | {T})
                for t in rounds:
                    w.writerow([label, run, t, repr(float(rec.cum_regret[t - 1]))])


def cmd_simulate(args) -> int:
    config = _load_json(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.runs is not None:
        config["runs"] = args.runs
    if args.horizon is not None:
        config["horizon"] = args.horizon
    if "horizon" not in config or "strategies" not in config:
        print("error: config needs 'horizon' and 'strategies'", file=sys.stderr)
        return 2
    stride = int(args.stride or config.get("stride", 1))
    if stride < 1:
        print("error: --stride must be positive", file=sys.stderr)
        return 2
    records, summary = replicate(config, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_curves(out / "curves.csv", records, stride)
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    (out / "summary.json").write_text(json.dumps(summary.as_dict(), indent=2) + "\n")
    print(summary.table())
    return 0


def cmd_monitor(args) -> int:
    config = _load_json(args.config)
    report = monitor_experiment(config, runs=args.runs, seed=args.seed, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "monitor.json").write_text(json.dumps(report.as_dict(), indent=2) + "\n")
    print(report.table())
    return 0


def cmd_report(args) -> int:
    d = Path(args.results)
    curves = d / "curves.csv"
    if not curves.exists():
        if (d / "monitor.json").exists():
            data = _load_json(d / "monitor.json")
            print(json.dumps(data["summary"], indent=2))
            return 0
        print(f"error: {d} holds neither curves.csv nor monitor.json", file=sys.stderr)
        return 2
    finals: dict[str, dict[int, tuple[int, float]]] = {}
    with curves.open() as fh:
        for row in csv.DictReader(fh):
            runs = finals.setdefault(row["strategy"], {})
            t, v = int(row["round"]), float(row["cum_regret"])
            if row["run"] not in runs or runs[row["run"]][0] < t:
                runs[row["run"]] = (t, v)
    config = _load_json(d / "config.json") if (d / "config.json").exists() else {}
    vectors = {k: np.array([v for _, (_, v) in sorted(runs.items(), key=lambda kv: int(kv[0]))])
               for k, runs in finals.items()}
    horizon = max(t for runs in finals.values() for t, _ in runs.values())
    summary = summarize(vectors, config.get("reference"), horizon)
    print(summary.table())
    if args.out:
        Path(args.out).write_text(json.dumps(summary.as_dict(), indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmkit", description="Partial monitoring experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="structure report of a game (JSON file or bundled name)")
    a.add_argument("game")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    def common(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--runs", type=int)
        sp.add_argument("--out", default="results")
        sp.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("simulate", help="regret curves for an experiment config")
    s.add_argument("config")
    common(s)
    s.add_argument("--horizon", type=int)
    s.add_argument("--stride", type=int)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("monitor", help="classifier monitoring experiment")
    m.add_argument("config")
    common(m)
    m.set_defaults(func=cmd_monitor)

    r = sub.add_parser("report", help="summary table of a results directory")
    r.add_argument("results")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
