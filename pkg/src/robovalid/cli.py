"""Command-line pipeline: enumerate tasks, print weakest preconditions,
generate covering-array configurations, and run falsification campaigns.

All artifacts are line-oriented text with sorted keys, so reruns with the
same flags and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import ctgen, falsify as fz, sim, stl
from .logic import format_formula, TRUE
from .tasks import Grammar, enumerate_derivations, format_task, parse_task
from .theory import WorldState, enumerate_initial_worlds, load_model
from .wp import holds_at, wp

MODEL_FORMAT_VERSION = "1"
OUT_ENV_VAR = "ROBOVALID_OUT"


def _atom_str(atom) -> str:
    return "%s(%s)" % (atom[0], ",".join(atom[1]))


def _parse_atom(text: str):
    name, rest = text.split("(", 1)
    args = tuple(a for a in rest.rstrip(")").split(",") if a)
    return (name, args)


def _config_record(cfg: ctgen.Configuration) -> dict:
    return {
        "fluents": sorted(_atom_str(a) for a in cfg.initial_world.true_atoms),
        "task": format_task(cfg.task),
        "assignment": list(cfg.source_assignment),
    }


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _load_configs(path, theory) -> list[ctgen.Configuration]:
    out = []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            w0 = WorldState(frozenset(_parse_atom(a) for a in rec["fluents"]))
            task = parse_task(rec["task"], theory)
            out.append(ctgen.Configuration(w0, task, tuple(rec["assignment"])))
    return out


def _apply_knob_overrides(scn: sim.Scenario, specs: list[str]) -> sim.Scenario:
    ranges = dict(scn.policy_ranges)
    for s in specs:
        name, _, bounds = s.partition("=")
        if name not in ranges:
            raise SystemExit("unknown policy knob %r" % name)
        lo, _, hi = bounds.partition(":")
        lo = float(lo)
        hi = float(hi) if hi else lo
        ranges[name] = (lo, hi)
    return sim.Scenario(scn.objects, scn.workspace, ranges)


def _counts_for_depth(theory, grammar, depth: int,
                      worlds=None) -> tuple[int, int]:
    if worlds is None:
        worlds = list(enumerate_initial_worlds(theory))
    syntax_valid = 0
    accomplishable = 0
    for _, task in enumerate_derivations(grammar, depth, theory):
        syntax_valid += 1
        phi = wp(TRUE, task, theory).formula
        if any(holds_at(phi, theory, w) for w in worlds):
            accomplishable += 1
    return syntax_valid, accomplishable


def cmd_enumerate(args) -> int:
    theory = load_model(args.model)
    grammar = Grammar(theory.grammar)
    worlds = list(enumerate_initial_worlds(theory))
    print("depth  syntax-valid  accomplishable")
    for k in range(1, args.depth + 1):
        sv, acc = _counts_for_depth(theory, grammar, k, worlds)
        print("%5d  %12d  %14d" % (k, sv, acc))
    return 0


def cmd_wp(args) -> int:
    theory = load_model(args.model)
    task = parse_task(args.task, theory)
    print(format_formula(wp(TRUE, task, theory).formula))
    return 0


def _generate(theory, depth: int, strength):
    grammar = Grammar(theory.grammar)
    model = ctgen.build_model(theory, grammar, depth, strength)
    valid = sorted(ctgen.enumerate_valid(model))
    rows = ctgen.generate_covering_array(model, strength, valid)
    configs = [ctgen.realize_configuration(model, r) for r in rows]
    return model, valid, rows, configs


def cmd_generate(args) -> int:
    theory = load_model(args.model)
    strength = args.strength if args.strength == "full" else int(args.strength)
    _, valid, rows, configs = _generate(theory, args.depth, strength)
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "configs.jsonl")
    with open(path, "w") as f:
        for cfg in configs:
            f.write(_json_line(_config_record(cfg)))
    grammar = Grammar(theory.grammar)
    sv, acc = _counts_for_depth(theory, grammar, args.depth)
    print("depth  syntax-valid  accomplishable  configurations  strength")
    print("%5d  %12d  %14d  %14d  %8s" % (args.depth, sv, acc, len(rows), strength))
    print("wrote %s" % path)
    return 0


def _run_campaign(theory, configs, scn, pmap, budget, seed, sim_dt, jobs):
    def one(i_cfg):
        i, cfg = i_cfg
        return fz.campaign([cfg], theory, scn, pmap, budget, seed + i, sim_dt)[0]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, enumerate(configs)))
    else:
        results = [one(x) for x in enumerate(configs)]
    entries = [fz.CampaignEntry(i, e.task_text, e.status, e.robustness,
                                e.evaluations, e.error)
               for i, (e, _) in enumerate(results)]
    return entries, [r for _, r in results]


def _write_report(out_dir, entries, results, summary) -> str:
    os.makedirs(out_dir, exist_ok=True)
    report = {
        "summary": summary,
        "configurations": [
            {"index": e.index, "task": e.task_text, "status": e.status,
             "robustness": e.robustness, "evaluations": e.evaluations,
             "error": e.error}
            for e in entries
        ],
    }
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as f:
        f.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    for e, res in zip(entries, results):
        if res is not None and res.status == "falsified":
            tpath = os.path.join(out_dir, "trace_%03d.csv" % e.index)
            with open(tpath, "w") as f:
                f.write(res.best_trace.to_csv())
    return path


def cmd_falsify(args) -> int:
    theory = load_model(args.model)
    pmap = stl.load_pmap(args.pmap)
    scn = _apply_knob_overrides(sim.load_scenario(args.scenario), args.knob)
    configs = _load_configs(args.configs, theory)
    entries, results = _run_campaign(theory, configs, scn, pmap, args.budget,
                                     args.seed, args.sim_dt, args.jobs)
    summary = fz.summarize(entries)
    path = _write_report(args.out, entries, results, summary)
    print("falsified %d / passed %d / errors %d of %d configurations"
          % (summary["falsified"], summary["passed"], summary["errors"],
             summary["configurations"]))
    print("wrote %s" % path)
    return 0


def cmd_validate(args) -> int:
    theory = load_model(args.model)
    strength = args.strength if args.strength == "full" else int(args.strength)
    pmap = stl.load_pmap(args.pmap)
    scn = _apply_knob_overrides(sim.load_scenario(args.scenario), args.knob)
    _, valid, rows, configs = _generate(theory, args.depth, strength)
    os.makedirs(args.out, exist_ok=True)
    cpath = os.path.join(args.out, "configs.jsonl")
    with open(cpath, "w") as f:
        for cfg in configs:
            f.write(_json_line(_config_record(cfg)))
    entries, results = _run_campaign(theory, configs, scn, pmap, args.budget,
                                     args.seed, args.sim_dt, args.jobs)
    summary = fz.summarize(entries)
    summary["valid_assignments"] = len(valid)
    summary["strength"] = str(strength)
    path = _write_report(args.out, entries, results, summary)
    passed = summary["passed"]
    print("Only %d configurations passed the validation (%d falsified, %d errors)"
          % (passed, summary["falsified"], summary["errors"]))
    print("wrote %s and %s" % (cpath, path))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="robovalid",
        description="Two-layer validation: combinatorial world-task generation "
                    "plus STL falsification against a toy kitchen.")
    p.add_argument("--version", action="version",
                   version="model-format %s" % MODEL_FORMAT_VERSION)
    sub = p.add_subparsers(dest="command", required=True)
    default_out = os.environ.get(OUT_ENV_VAR, "out")

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", required=True)

    sp = sub.add_parser("enumerate", help="task counts per derivation depth")
    common(sp)
    sp.add_argument("--depth", type=int, required=True)
    sp.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("wp", help="weakest precondition of a task")
    common(sp)
    sp.add_argument("--task", required=True)
    sp.set_defaults(func=cmd_wp)

    sp = sub.add_parser("generate", help="covering-array configurations")
    common(sp)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--strength", default="2",
                    help="coverage strength: 1, 2, 3, ... or 'full'")
    sp.add_argument("--out", default=default_out)
    sp.set_defaults(func=cmd_generate)

    def falsify_flags(sp):
        sp.add_argument("--pmap", required=True)
        sp.add_argument("--scenario", required=True)
        sp.add_argument("--budget", type=int, default=25)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--sim-dt", type=float, default=0.25)
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--knob", action="append", default=[],
                        metavar="NAME=LO[:HI]",
                        help="override a policy knob range, e.g. "
                             "doorTorqueLimit=0.3")
        sp.add_argument("--out", default=default_out)

    sp = sub.add_parser("falsify", help="falsify configurations from a file")
    common(sp)
    sp.add_argument("--configs", required=True)
    falsify_flags(sp)
    sp.set_defaults(func=cmd_falsify)

    sp = sub.add_parser("validate", help="full generate-and-falsify pipeline")
    common(sp)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--strength", default="2")
    falsify_flags(sp)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
