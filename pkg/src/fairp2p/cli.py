"""Command-line scenario runner.

Exit codes: 0 when every verdict passes, 1 when any verdict fails, 2 on usage
errors (unreadable or invalid scenario, empty suite directory).
"""
from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from .crypto import BUILD_CONSTANTS
from .errors import ScenarioError
from .scenario import Scenario, bundled_dir, load, scenario_files
from .simnet import CONTRACT, check_invariants, run

REPORT_SCHEMA = "fairp2p-report/1"
EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def run_scenario(sc: Scenario) -> list[dict]:
    """Every repetition of one scenario as report records (runs, then verdicts)."""
    records = []
    for rep in range(sc.repetitions):
        seed = sc.seed + rep
        tr = run(sc.config, sc.adversary, seed, content=sc.content(seed), name=sc.name)
        verdicts = check_invariants(tr, sc.config, sc.adversary, sc.expect)
        starts = tr.session_start or [0]
        latency = {nm: {str(i): r - starts[0] for i, r in sorted(rounds.items())}
                   for nm, rounds in tr.decrypt_rounds.items() if rounds}
        records.append({
            "type": "run", "scenario": sc.name, "seed": seed, "mode": sc.config.mode,
            "n": sc.config.n, "eta": sc.config.eta, "rounds": tr.rounds,
            "opening": tr.opening, "final": tr.final, "residual_escrow": tr.escrow,
            "deltas": {p: tr.delta(p) for p in tr.opening},
            "settlements": tr.settlements, "contract": tr.contract_counters,
            "halt_rounds": tr.halt_rounds, "bytes_sent": tr.bytes_sent,
            "decrypt_latency": latency,
            "events": [r for r in tr.records if r["type"] == "event"],
            "passed": all(v.passed for v in verdicts),
        })
        for v in verdicts:
            records.append(dict(v.as_dict(), type="verdict", scenario=sc.name, seed=seed))
    return records


def summarize(records: list[dict]) -> dict:
    runs = [r for r in records if r["type"] == "run"]
    verdicts = [r for r in records if r["type"] == "verdict"]
    failed = sorted({(v["scenario"], v["seed"], v["check"]) for v in verdicts if not v["passed"]})
    rounds = [r["rounds"] for r in runs]
    return {
        "type": "summary", "runs": len(runs), "verdicts": len(verdicts),
        "failed": [{"scenario": s, "seed": seed, "check": c} for s, seed, c in failed],
        "failed_scenarios": sorted({s for s, _, _ in failed}),
        "rounds_mean": statistics.fmean(rounds) if rounds else 0,
        "rounds_max": max(rounds, default=0),
        "passed": not failed,
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fairp2p",
        description="Run fair-delivery scenarios in the round simulator and check fairness invariants.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    ap.add_argument("scenario", nargs="?", help="scenario JSON file")
    ap.add_argument("--suite", nargs="?", const=str(bundled_dir()), default=None, metavar="DIR",
                    help="run every *.json scenario in DIR (bundled suite when DIR is omitted)")
    ap.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    ap.add_argument("--mode", choices=["download", "stream"], default=None, help="override the mode")
    ap.add_argument("--n", type=int, default=None, help="override the chunk count (power of two)")
    ap.add_argument("--eta", type=int, default=None, help="override the chunk size in bytes")
    ap.add_argument("--out", default=None, help="write the JSON-lines report here")
    ap.add_argument("--quiet", action="store_true", help="only print failures and the summary")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if (args.scenario is None) == (args.suite is None):
        ap.print_usage(sys.stderr)
        print("fairp2p: give exactly one of a scenario file or --suite", file=sys.stderr)
        return EXIT_USAGE
    try:
        paths = scenario_files(args.suite) if args.suite is not None else [Path(args.scenario)]
        scenarios = [load(p).with_overrides(args.seed, args.mode, args.n, args.eta) for p in paths]
    except ScenarioError as exc:
        print(f"fairp2p: {exc}", file=sys.stderr)
        return EXIT_USAGE

    records = [{"type": "report", "schema": REPORT_SCHEMA, "build": BUILD_CONSTANTS,
                "round_order": [CONTRACT, "P", "D", "C"],
                "scenarios": [sc.name for sc in scenarios]}]
    for sc in scenarios:
        recs = run_scenario(sc)
        records += recs
        for r in recs:
            if r["type"] != "verdict" or (args.quiet and r["passed"]):
                continue
            mark = "PASS" if r["passed"] else "FAIL"
            print(f"{mark} {r['scenario']} seed={r['seed']} {r['check']}: {r['property']} ({r['detail']})")
    summary = summarize(records)
    records.append(summary)
    verdict = "PASS" if summary["passed"] else "FAIL"
    print(f"{verdict}: {summary['runs']} runs, {summary['verdicts']} verdicts, "
          f"{len(summary['failed'])} failed" +
          (f" in {', '.join(summary['failed_scenarios'])}" if summary["failed"] else ""))
    if args.out:
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
        Path(args.out).write_text(text)
    return EXIT_PASS if summary["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
