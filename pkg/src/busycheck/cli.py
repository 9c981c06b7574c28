"""Command-line interface: parse, run, verify, check-proof, trace, graph, fuzz.

Exit codes: 0 on success / Verified / Ok, 1 on Rejected / RuleViolation /
divergence witness, 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .ghost import annotate, serialize_annotated_trace
from .harness import CampaignViolation, GenConfig, soundness_campaign
from .lang import Command, ParseError, normalize, parse, pretty
from .pog import build_pog, max_loopfree_sc_prefix, to_dot
from .proofs import check_proof, load_certificate, save_certificate, verify
from .semantics import (
    AbruptExit,
    FuelExhausted,
    Terminated,
    explore,
    initial_pool,
    random_fair,
    rotated_round_robin,
    round_robin,
    run,
    serialize_trace,
    sufficient_fuel,
)


def _add_program_arg(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("path", nargs="?", help="program file")
    group.add_argument("-e", "--expr", help="inline program text")


def _add_scheduler_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--sched",
        default="round-robin",
        help="round-robin | rotated:K | random (default: round-robin)",
    )
    sub.add_argument("--seed", type=int, default=0, help="seed for the random scheduler")
    sub.add_argument("--window", type=int, default=16, help="fairness window for the random scheduler")
    sub.add_argument("--fuel", type=int, default=None, help="step budget (default: state-space bound)")


def _load_program(args) -> Command:
    if args.expr is not None:
        text = args.expr
    else:
        with open(args.path, encoding="utf-8") as fh:
            text = fh.read()
    return normalize(parse(text))


def _make_scheduler(args):
    name = args.sched
    if name == "round-robin":
        return round_robin()
    if name.startswith("rotated:"):
        try:
            offset = int(name.split(":", 1)[1])
        except ValueError:
            raise SystemExit2(f"bad rotation offset in {name!r}") from None
        return rotated_round_robin(offset)
    if name == "random":
        return random_fair(args.seed, args.window)
    raise SystemExit2(f"unknown scheduler {name!r}")


class SystemExit2(Exception):
    pass


def _fuel_for(args, program: Command) -> int:
    if args.fuel is not None:
        return args.fuel
    return sufficient_fuel(explore(program))


def _cmd_parse(args) -> int:
    print(pretty(_load_program(args)))
    return 0


def _cmd_run(args) -> int:
    program = _load_program(args)
    outcome, trace = run(initial_pool(program), _make_scheduler(args), _fuel_for(args, program))
    if isinstance(outcome, Terminated):
        text = f"Terminated steps={outcome.steps}"
    elif isinstance(outcome, AbruptExit):
        text = f"AbruptExit steps={outcome.steps}"
    else:
        text = f"FuelExhausted live={len(outcome.last_pool.threads)}"
    if args.json:
        payload = {"outcome": text.split()[0], "steps": len(trace)}
        if args.show_trace:
            payload["trace"] = serialize_trace(trace).splitlines()
        print(json.dumps(payload, indent=2))
    else:
        if args.show_trace and trace:
            print(serialize_trace(trace))
        print(text)
    return 0


def _cmd_verify(args) -> int:
    program = _load_program(args)
    proof = verify(program)
    if proof is None:
        print(json.dumps({"verdict": "Rejected"}) if args.json else "Rejected")
        return 1
    if args.emit_cert:
        save_certificate(proof, args.emit_cert)
    if args.json:
        payload = {"verdict": "Verified"}
        if args.emit_cert:
            payload["certificate"] = args.emit_cert
        print(json.dumps(payload))
    else:
        print("Verified")
    return 0


def _cmd_check_proof(args) -> int:
    tree = load_certificate(args.cert)
    violation = check_proof(tree)
    if violation is None:
        print("Ok")
        return 0
    print(f"RuleViolation {violation}")
    return 1


def _verified_trace(args):
    program = _load_program(args)
    proof = verify(program)
    if proof is None:
        print("Rejected", file=sys.stderr)
        return None
    outcome, trace = run(initial_pool(program), _make_scheduler(args), _fuel_for(args, program))
    if isinstance(outcome, FuelExhausted):
        print("run did not settle within fuel; raise --fuel", file=sys.stderr)
        return None
    return annotate(program, proof, trace)


def _cmd_trace(args) -> int:
    atrace = _verified_trace(args)
    if atrace is None:
        return 1
    print(serialize_annotated_trace(atrace))
    return 0


def _cmd_graph(args) -> int:
    atrace = _verified_trace(args)
    if atrace is None:
        return 1
    graph = build_pog(atrace)
    prefix = max_loopfree_sc_prefix(graph) if args.prefix else None
    dot = to_dot(graph, prefix)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(dot + "\n")
    else:
        print(dot)
    return 0


def _cmd_fuzz(args) -> int:
    cfg = GenConfig(
        max_atoms=args.max_atoms,
        fork_prob=args.fork_weight,
        loop_prob=args.loop_weight,
        exit_prob=args.exit_weight,
        seed=args.seed,
        count=args.count,
    )
    try:
        report = soundness_campaign(cfg, exhaustive_max_atoms=args.exhaustive_max)
    except CampaignViolation as violation:
        print(f"violation: {violation}", file=sys.stderr)
        return 1
    print(report.to_json() if args.json else report.summary())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="busycheck",
        description="termination checker for busy-waiting programs with abrupt exit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("parse", help="echo the normalized program")
    _add_program_arg(p)
    p.set_defaults(func=_cmd_parse)

    p = subs.add_parser("run", help="run the plain semantics")
    _add_program_arg(p)
    _add_scheduler_args(p)
    p.add_argument("--show-trace", action="store_true", help="print the step trace")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = subs.add_parser("verify", help="search for a termination proof")
    _add_program_arg(p)
    p.add_argument("--emit-cert", metavar="FILE", help="write the certificate as JSON")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_verify)

    p = subs.add_parser("check-proof", help="check a proof certificate")
    p.add_argument("cert", help="certificate file (JSON)")
    p.set_defaults(func=_cmd_check_proof)

    p = subs.add_parser("trace", help="annotated trace of a verified program")
    _add_program_arg(p)
    _add_scheduler_args(p)
    p.set_defaults(func=_cmd_trace)

    p = subs.add_parser("graph", help="program order graph as DOT")
    _add_program_arg(p)
    _add_scheduler_args(p)
    p.add_argument("--prefix", action="store_true", help="shade the max loop-free sibling-closed prefix")
    p.add_argument("-o", "--out", metavar="FILE", help="write DOT here instead of stdout")
    p.set_defaults(func=_cmd_graph)

    p = subs.add_parser("fuzz", help="random + exhaustive soundness campaign")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--max-atoms", type=int, default=12)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--exhaustive-max", type=int, default=6, help="sweep all programs up to this many atoms (0 disables)")
    p.add_argument("--fork-weight", type=float, default=1.0)
    p.add_argument("--loop-weight", type=float, default=1.0)
    p.add_argument("--exit-weight", type=float, default=1.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_fuzz)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return 2
    except SystemExit2 as err:
        print(str(err), file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(str(err), file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
