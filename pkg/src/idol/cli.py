"""Command-line interface.

    idol run         full campaign over a corpus
    idol mutate      print mutants + provenance for one file
    idol check-equiv O0 equivalence gate for a (file, mutant) pair
    idol reduce      minimize a finding report
    idol replay      re-run a finding report and print the verdict
    idol fetch-solc  provision a pinned solc (soljson via npm)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from idol import compile as C
from idol import oracle as O
from idol.campaign import CampaignConfig, MODE_DOL, MODE_IDOL, run_campaign
from idol.corpus import SourceUnit
from idol.execute import plan_calls, run as run_artifact
from idol.mutate import TransformKind, mutate_unit


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idol")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a differential-testing campaign")
    p_run.add_argument("--corpus", required=False, help="corpus directory")
    p_run.add_argument("--solc", action="append", default=[],
                       help="solc executable (repeatable)")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--units", type=int, default=100)
    p_run.add_argument("--budget", type=int, default=2)
    p_run.add_argument("--jobs", type=int, default=0)
    p_run.add_argument("--rounds", type=int, default=2)
    p_run.add_argument("--out", default="idol-out")
    p_run.add_argument("--kinds", nargs="*", default=None,
                       help="transform kinds to enable (default: all)")
    p_run.add_argument("--via-ir", choices=["legacy", "both"], default="legacy")
    p_run.add_argument("--runs-list", nargs="*", type=int, default=None)
    p_run.add_argument("--evm-version", default="istanbul")
    p_run.add_argument("--dol-baseline", action="store_true")
    p_run.add_argument("--reduce", action="store_true")
    p_run.add_argument("--config", help="TOML config file (flags override)")

    p_mut = sub.add_parser("mutate", help="mutate one contract file")
    p_mut.add_argument("file")
    p_mut.add_argument("--seed", type=int, default=0)
    p_mut.add_argument("--budget", type=int, default=3)
    p_mut.add_argument("--kinds", nargs="*", default=None)
    p_mut.add_argument("--out", default=None, help="write mutants + provenance here")

    p_chk = sub.add_parser("check-equiv", help="O0 equivalence gate for a mutant")
    p_chk.add_argument("file")
    p_chk.add_argument("mutant")
    p_chk.add_argument("--solc", required=True)
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.add_argument("--rounds", type=int, default=2)
    p_chk.add_argument("--evm-version", default="istanbul")

    p_red = sub.add_parser("reduce", help="minimize a finding report")
    p_red.add_argument("report")
    p_red.add_argument("--out", default=None)

    p_rep = sub.add_parser("replay", help="replay a finding report")
    p_rep.add_argument("report")

    p_fetch = sub.add_parser("fetch-solc", help="provision a pinned solc version")
    p_fetch.add_argument("version")
    p_fetch.add_argument("--dest", default=None)
    return parser


def _cmd_run(args) -> int:
    data: dict = {}
    if args.config:
        data.update(CampaignConfig.from_toml(args.config).__dict__)
    if args.corpus:
        data["corpus_root"] = args.corpus
    if args.solc:
        data["solc_paths"] = args.solc
    if "corpus_root" not in data or not data.get("solc_paths"):
        print("error: --corpus and --solc are required (or a --config providing them)",
              file=sys.stderr)
        return 2
    data.update({"seed": args.seed, "units": args.units, "budget": args.budget,
                 "jobs": args.jobs, "rounds": args.rounds, "out_dir": args.out,
                 "evm_version": args.evm_version,
                 "reduce_findings": args.reduce})
    if args.kinds is not None:
        data["kinds"] = [TransformKind.from_name(k).value for k in args.kinds]
    if args.runs_list is not None:
        data["runs_list"] = args.runs_list
    if args.via_ir == "both":
        data["pipelines"] = ["legacy", "via-ir"]
    config = CampaignConfig.from_dict(data)
    mode = MODE_DOL if args.dol_baseline else MODE_IDOL
    report = run_campaign(config, mode=mode)
    counts = report["counts"]
    print(f"units={counts['units_processed']} mutants={counts['mutants']} "
          f"agree={counts['agree']} divergence={counts['divergence']} "
          f"inconclusive={counts['inconclusive']} "
          f"nonequivalent={counts['nonequivalent']} "
          f"findings={len(report['findings'])}")
    print(f"report: {Path(config.out_dir) / 'campaign.json'}")
    return report["exit_code"]


def _cmd_mutate(args) -> int:
    source = Path(args.file).read_text()
    unit = SourceUnit.from_source(source, path=args.file)
    kinds = tuple(TransformKind.from_name(k) for k in args.kinds) \
        if args.kinds else tuple(TransformKind)
    mutants = mutate_unit(unit, args.seed, args.budget, kinds=kinds)
    payload = {"parent_id": unit.id, "path": args.file, "seed": args.seed,
               "mutants": [m.to_jsonable() for m in mutants]}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_check_equiv(args) -> int:
    from idol.oracle import check_mutant_equivalence, EQUIVALENT

    parent_src = Path(args.file).read_text()
    mutant_src = Path(args.mutant).read_text()
    cfg = C.CompileConfig(optimize=False, solc_path=args.solc,
                          evm_version=args.evm_version)
    results = []
    for label, src in (("parent", parent_src), ("mutant", mutant_src)):
        r = C.compile_source(src, f"{label}.sol", cfg)
        if not r.ok:
            print(f"{label} does not compile at O0: {r.error_summary()}",
                  file=sys.stderr)
            return 2
        results.append(r.artifact)
    plan = plan_calls(results[0].abi, args.seed, rounds=args.rounds)
    parent_trace = run_artifact(results[0], plan)
    mutant_trace = run_artifact(results[1], plan)
    status, detail = check_mutant_equivalence(parent_trace, mutant_trace)
    print(json.dumps({"status": status,
                      "detail": detail.to_jsonable() if detail else None},
                     indent=2, sort_keys=True))
    return 0 if status == EQUIVALENT else O.EXIT_NONEQUIVALENCE


def _cmd_reduce(args) -> int:
    from idol.reduce import reduce_report

    report = json.loads(Path(args.report).read_text())
    minimized = reduce_report(report)
    if minimized is None:
        print("divergence not reproducible; original retained", file=sys.stderr)
        return 1
    if args.out:
        Path(args.out).write_text(minimized)
        print(f"minimized reproducer written to {args.out}")
    else:
        print(minimized)
    return 0


def _cmd_replay(args) -> int:
    from idol.reduce import replay_verdict

    report = json.loads(Path(args.report).read_text())
    verdict = replay_verdict(report["mutant_source"], report)
    if verdict is None:
        print("replay failed: a config no longer compiles", file=sys.stderr)
        return 2
    print(json.dumps(verdict.to_jsonable(), indent=2, sort_keys=True))
    return 0 if verdict.kind != O.DIVERGENCE else O.EXIT_BEHAVIORAL


def _cmd_fetch_solc(args) -> int:
    from idol.solctool import default_cache_dir, ensure_solc

    dest = Path(args.dest) if args.dest else default_cache_dir()
    path = ensure_solc(args.version, dest)
    print(path)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "mutate": _cmd_mutate,
                "check-equiv": _cmd_check_equiv, "reduce": _cmd_reduce,
                "replay": _cmd_replay, "fetch-solc": _cmd_fetch_solc}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
