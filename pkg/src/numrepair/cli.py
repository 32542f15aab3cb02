"""Command-line front end.

Exit codes: 0 consistent/true, 1 inconsistent/false, 2 error, 3 indeterminate.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .circuits import brute_force_sat, gen_circuit
from .cqa import cqa, make_query
from .dsl import parse_ground_atom
from .errors import BranchLimitError, InvalidUpdateError, NumRepairError
from .evaluator import check
from .linear import encode_support
from .project import Project, load_project, write_circuit_project
from .repair import SEMANTICS, RepairReport, check_repair, minimal_supports

EXIT_OK = 0
EXIT_FALSE = 1
EXIT_ERROR = 2
EXIT_UNKNOWN = 3


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _limits(project: Project, args: argparse.Namespace):
    return project.limits(
        max_support=getattr(args, "max_support", None),
        max_branches=getattr(args, "max_branches", None),
        box=getattr(args, "box", None),
    )


def load_repair_file(path: Path) -> list[tuple[tuple[str, int, str], object]]:
    """Read a JSON list of ``{relation, row, attribute, value}`` objects."""
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidUpdateError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidUpdateError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, list):
        raise InvalidUpdateError(f"{path}: expected a JSON list of updates")
    out = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) != {"relation", "row", "attribute", "value"}:
            raise InvalidUpdateError(f"{path}: update {i} needs exactly relation, row, attribute and value")
        if not isinstance(item["row"], int) or isinstance(item["row"], bool):
            raise InvalidUpdateError(f"{path}: update {i}: row must be an integer")
        out.append(((item["relation"], item["row"], item["attribute"]), item["value"]))
    return out


# -- subcommands ----------------------------------------------------------------


def cmd_check(args: argparse.Namespace) -> int:
    project = load_project(args.project)
    report = check(project.instance, project.constraints)
    _emit(report.to_json() if args.json else report.to_table())
    return EXIT_OK if report.consistent else EXIT_FALSE


def _report_text(report: RepairReport, project: Project) -> str:
    if report.consistent:
        return "consistent: the empty update is the only minimal repair"
    lines = []
    if report.semantics == "card":
        lines.append(f"k* = {report.kstar}" if report.kstar is not None else "k* not found within the limits")
    lines.append(f"{len(report.supports)} {report.semantics}-minimal support(s)"
                 f" (max support {report.limits.max_support}, {'complete' if report.complete else 'truncated'})")
    for entry in report.supports:
        changes = ", ".join(
            f"{u.cell}: {project.instance.value(u.cell)} -> {u.value}" for u in entry.sample
        )
        lines.append(f"  {{{', '.join(str(c) for c in entry.cells)}}}  e.g. {changes}")
    for cells in report.indeterminate:
        lines.append(f"  undecided: {{{', '.join(str(c) for c in cells)}}}")
    return "\n".join(lines)


def _dump_systems(report: RepairReport, project: Project, path: Path, max_branches: Optional[int]) -> None:
    dump = []
    for entry in report.supports:
        item: dict = {"support": [str(c) for c in entry.cells]}
        try:
            item.update(encode_support(project.instance, project.constraints, entry.cells, max_branches).to_dict())
        except BranchLimitError as exc:
            item["error"] = str(exc)
        dump.append(item)
    text = json.dumps(dump, indent=2) + "\n"
    if str(path) == "-":
        sys.stderr.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def cmd_repair(args: argparse.Namespace) -> int:
    project = load_project(args.project)
    limits = _limits(project, args)
    report = minimal_supports(project.instance, project.constraints, args.semantics, limits=limits)
    if args.dump_systems is not None:
        _dump_systems(report, project, args.dump_systems, limits.max_branches)
    _emit(report.to_json(project.instance) if args.json else _report_text(report, project))
    if report.consistent:
        return EXIT_OK
    if not report.supports and (not report.complete or report.indeterminate):
        return EXIT_UNKNOWN
    return EXIT_FALSE


def cmd_check_repair(args: argparse.Namespace) -> int:
    project = load_project(args.project)
    updates = load_repair_file(args.repair)
    verdict = check_repair(project.instance, project.constraints, updates, args.semantics,
                           limits=_limits(project, args))
    if args.json:
        _emit(json.dumps(verdict.to_dict(), indent=2))
    else:
        minimal = {True: "minimal", False: "not minimal", None: "minimality undecided"}[verdict.is_minimal]
        if verdict.is_repair:
            text = f"repair, {minimal} under {verdict.semantics} semantics"
        else:
            text = "not a repair"
        _emit(text + (f" ({verdict.reason})" if verdict.reason else ""))
    if verdict.is_repair and verdict.is_minimal is None:
        return EXIT_UNKNOWN
    return EXIT_OK if verdict.is_repair and verdict.is_minimal else EXIT_FALSE


def cmd_cqa(args: argparse.Namespace) -> int:
    project = load_project(args.project)
    relation, values = parse_ground_atom(args.atom, project.instance.schema)
    query = make_query(project.instance, relation, values)
    verdict = cqa(project.instance, project.constraints, query, args.semantics, limits=_limits(project, args))
    if args.json:
        _emit(verdict.to_json(project.instance))
    else:
        _emit(f"{verdict.answer}: {verdict.reason}")
        if verdict.witness is not None:
            for u in verdict.witness:
                _emit(f"  {u.cell}: {project.instance.value(u.cell)} -> {u.value}")
    return {"true": EXIT_OK, "false": EXIT_FALSE}.get(verdict.answer, EXIT_UNKNOWN)


def cmd_gen_circuit(args: argparse.Namespace) -> int:
    circuit = gen_circuit(args.gates, args.inputs, args.seed)
    out = write_circuit_project(args.out, circuit)
    info = {"directory": str(out), "circuit": circuit.describe(), "gates": circuit.num_gates,
            "inputs": circuit.num_inputs, "seed": args.seed}
    if circuit.num_inputs <= 12:
        info["satisfiable"] = brute_force_sat(circuit)
    if args.json:
        _emit(json.dumps(info, indent=2))
    else:
        _emit(f"wrote {out}: {info['circuit']}")
        if "satisfiable" in info:
            _emit(f"satisfiable: {str(info['satisfiable']).lower()}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="numrepair",
        description="Check, repair and query numerical databases under linear aggregate constraints.",
        epilog="Exit codes: 0 consistent/true, 1 inconsistent/false, 2 error, 3 indeterminate. "
        "NUMREPAIR_MAX_BRANCHES overrides the default branch cap.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def project_cmd(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("project", type=Path, help="project directory")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    def limit_flags(p: argparse.ArgumentParser, semantics_default: str) -> None:
        p.add_argument("--semantics", choices=SEMANTICS, default=semantics_default)
        p.add_argument("--max-support", type=_nonneg, help="largest support size searched")
        p.add_argument("--max-branches", type=_positive, help="branch cap per support")
        p.add_argument("--box", type=_positive, help="fixed bound on integer variables")

    p = project_cmd("check", "list violated ground constraints")
    p.set_defaults(func=cmd_check)

    p = project_cmd("repair", "enumerate minimal repair supports")
    limit_flags(p, "card")
    p.add_argument("--dump-systems", type=Path, metavar="FILE",
                   help="write the linear systems of each reported support as JSON ('-' for stderr)")
    p.set_defaults(func=cmd_repair)

    p = project_cmd("check-repair", "decide whether an update set is a (minimal) repair")
    limit_flags(p, "set")
    p.add_argument("--repair", type=Path, required=True, help="JSON list of {relation,row,attribute,value}")
    p.set_defaults(func=cmd_check_repair)

    p = project_cmd("cqa", "consistent answer to a ground atom")
    limit_flags(p, "card")
    p.add_argument("--atom", required=True, help="ground atom such as Rel(1, 'a', 2)")
    p.set_defaults(func=cmd_cqa)

    p = sub.add_parser("gen-circuit", help="write the repair project of a random NOR circuit")
    p.add_argument("--gates", type=_positive, required=True)
    p.add_argument("--inputs", type=_positive, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_gen_circuit)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NumRepairError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
