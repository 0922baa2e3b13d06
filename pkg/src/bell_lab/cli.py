"""Command-line interface.

One subcommand per audit plus `report`, which chains them over a single
theory-spec file: validation, Bell and signal locality, anti-correlation,
instruction derivation, Bell tests, and optionally a simulation.  Exit
codes: 0 = clean verdict (or report generated), 1 = audited property
fails, 2 = input could not be used (parse error, schema violation,
invalid model, bad flags).

JSON output is canonical: keys sorted, two-space indent, one trailing
newline.  Parsing a JSON report and re-rendering it reproduces the bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from typing import Any

from . import __version__
from .audit import (
    EqualAxisError,
    check_anticorrelation,
    check_bell_locality,
    check_signal_locality,
)
from .harness import (
    AntiCorrelationPreconditionError,
    BellTestResult,
    EnumerationLimitError,
    ScenarioShapeError,
    all_correlators,
    bell1964,
    chsh,
    local_polytope_membership,
    resolve_axes,
)
from .instructions import classify_states, derive_instruction_sets, DerivationFailure
from .model import BellLabError, TheoryModel, behavior, format_probability, validate_theory
from .montecarlo import (
    FixedSequencePolicy,
    UniformSettingPolicy,
    run_experiment,
    summarize,
    write_records_csv,
)
from .singlet import make_planar_singlet
from .specio import SpecFormatError, dump_theory, parse_theory, theory_to_dict

PROG = "bell-lab"


def emit_json(obj: Any, out=None) -> None:
    (out or sys.stdout).write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _parse_roles(text: str) -> tuple[str, str, str, str]:
    """'a1,a2:b1,b2' -> roles (a, a_prime, b, b_prime)."""
    try:
        alice_part, bob_part = text.split(":")
        a, a2 = (s.strip() for s in alice_part.split(","))
        b, b2 = (s.strip() for s in bob_part.split(","))
    except ValueError:
        raise BellLabError(f"expected 'a,aPrime:b,bPrime', got {text!r}") from None
    return a, a2, b, b2


def _parse_axes_arg(model: TheoryModel, text: str | None) -> list[tuple[str, str]] | None:
    if text is None:
        return None
    names = [chunk.strip() for chunk in text.split(",") if chunk.strip()]
    if not names:
        raise BellLabError("--axes given but empty")
    return resolve_axes(model.scenario, names)


def _load(path: str) -> tuple[TheoryModel, bytes]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise SpecFormatError(f"cannot read {path}: {exc}") from exc
    model = parse_theory(raw.decode("utf-8"), source=path)
    return model, raw


# ---------------------------------------------------------------------------
# text renderers


def _fmt(p) -> str:
    rendered = format_probability(p)
    return rendered if isinstance(rendered, str) else repr(rendered)


def render_validation(violations, out) -> None:
    if not violations:
        out.write("model valid\n")
        return
    out.write(f"model INVALID: {len(violations)} violation(s)\n")
    for v in violations:
        out.write(f"  {v.location}: {v.message}\n")


def render_locality(report, out) -> None:
    out.write(f"Bell locality: {report.verdict}\n")
    out.write(f"  worst factorization residual: {_fmt(report.worst_residual)}\n")
    out.write(f"  residual metric (this tool's choice): max |joint - product|\n")
    out.write(f"  tolerance: {report.tolerance!r}\n")
    for v in report.violations[:20]:
        slot_a = "." if v.outcome_a is None else ("+" if v.outcome_a > 0 else "-")
        slot_b = "." if v.outcome_b is None else ("+" if v.outcome_b > 0 else "-")
        out.write(
            f"  [{v.form}] state={v.state_id} a={v.a_id} b={v.b_id} "
            f"outcomes={slot_a}{slot_b} lhs={_fmt(v.lhs)} rhs={_fmt(v.rhs)} "
            f"residual={_fmt(v.residual)}\n"
        )
    if len(report.violations) > 20:
        out.write(f"  ... {len(report.violations) - 20} more violation(s)\n")


def render_signal(report, out) -> None:
    out.write(f"Signal locality: {report.verdict}\n")
    out.write(f"  max delta: {_fmt(report.max_delta)} (tolerance {report.tolerance!r})\n")
    for d in report.deltas:
        if d.delta > report.tolerance:
            out.write(
                f"  {d.side} P({d.outcome:+d}|{d.own_setting}) moves across "
                f"{d.far_pair[0]}/{d.far_pair[1]}: delta {_fmt(d.delta)}\n"
            )


def render_anticorr(report, out) -> None:
    out.write(f"Anti-correlation: {report.verdict}\n")
    out.write(f"  axes: {', '.join(f'{a}={b}' for a, b in report.axes_checked)}\n")
    for c in report.offending():
        out.write(
            f"  state={c.state_id} axis {c.a_id}={c.b_id}: "
            f"P(+,+)={_fmt(c.same_plus)} P(-,-)={_fmt(c.same_minus)}\n"
        )


def render_instructions(result, partition, out) -> None:
    if isinstance(result, DerivationFailure):
        out.write("Instruction derivation: FAILED\n")
        out.write(
            f"  state={result.state_id} axis {result.axis[0]}={result.axis[1]} "
            f"side={result.side} marginal={_fmt(result.marginal)}\n"
        )
        out.write(f"  reason: {result.reason}\n")
        return
    out.write("Instruction derivation: OK\n")
    axes_text = ", ".join(f"{a}={b}" for a, b in result.axes)
    out.write(f"  axes: {axes_text}\n")
    for state_id in result.state_ids():
        pattern = "".join("+" if s > 0 else "-" for s in result.pattern(state_id))
        out.write(
            f"  state {state_id}: pattern {pattern} "
            f"(weight {_fmt(result.weights[state_id])})\n"
        )
    if partition is not None:
        out.write(f"  classes ({len(partition.classes)} patterns):\n")
        for cls in partition.classes:
            members = ",".join(cls.members) if cls.members else "-"
            out.write(
                f"    {cls.label()}: weight {_fmt(cls.weight)} members {members}\n"
            )


def render_bell_tests(result: BellTestResult, out) -> None:
    out.write("Correlators:\n")
    for (a, b), e in result.correlators.items():
        out.write(f"  E({a},{b}) = {_fmt(e)}\n")
    if result.chsh is not None:
        r = result.chsh
        out.write(f"CHSH ({r.convention}):\n")
        out.write(
            f"  roles a={r.roles[0]} a'={r.roles[1]} b={r.roles[2]} b'={r.roles[3]}\n"
        )
        out.write(f"  S = {_fmt(r.chsh_value)}, local bound {_fmt(r.local_bound)} "
                  f"(brute-forced), violated: {r.violated}\n")
    if result.bell1964 is not None:
        r = result.bell1964
        axes_text = ", ".join(f"{a}={b}" for a, b in r.axes)
        out.write(f"Three-axis inequality on {axes_text}:\n")
        out.write(
            f"  lhs {_fmt(r.lhs)} vs rhs {_fmt(r.rhs)}: "
            f"{'satisfied' if r.satisfied else 'VIOLATED'}\n"
        )
    if result.membership is not None:
        m = result.membership
        out.write(f"Local polytope: {'inside' if m.inside else 'OUTSIDE'}\n")
        out.write(f"  feasibility residual: {_fmt(m.residual)}\n")
        if m.weights:
            out.write(f"  convex weights over {len(m.weights)} strategies:\n")
            for strat, w in m.weights.items():
                out.write(f"    {_fmt(w)}  {strat.label()}\n")
        if m.functional is not None:
            f = m.functional
            out.write(f"  separating functional ({f.kind}): {f.description}\n")
            out.write(f"  bound {_fmt(f.bound)}, value {_fmt(f.value)}\n")


def render_stats(stats, out) -> None:
    out.write(f"Simulation: {stats.trials} trials (seed {stats.seed})\n")
    for (a, b), e in stats.correlators.items():
        n = stats.pair_counts[(a, b)]
        out.write(f"  E({a},{b}) = {e.value:+.6f} +/- {e.std_error:.6f}  (n={n})\n")
    if stats.chsh is not None:
        roles = stats.chsh_roles
        out.write(
            f"  CHSH[a={roles[0]},a'={roles[1]},b={roles[2]},b'={roles[3]}] "
            f"= {stats.chsh.value:+.6f} +/- {stats.chsh.std_error:.6f}\n"
        )
    worst = max(stats.signal_deltas, key=lambda d: d.delta, default=None)
    if worst is not None:
        out.write(
            f"  worst no-signaling delta: {worst.delta:.6f} +/- {worst.std_error:.6f} "
            f"({worst.side} P({worst.outcome:+d}|{worst.own_setting}) across "
            f"{worst.far_pair[0]}/{worst.far_pair[1]})\n"
        )


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_validate(args) -> int:
    model, _ = _load(args.spec)
    violations = validate_theory(model, args.tol)
    if args.fmt == "json":
        emit_json(
            {
                "valid": not violations,
                "violations": [
                    {"location": v.location, "message": v.message} for v in violations
                ],
            }
        )
    else:
        render_validation(violations, sys.stdout)
    return 0 if not violations else 1


def cmd_check_locality(args) -> int:
    model, _ = _load(args.spec)
    report = check_bell_locality(model, args.tol)
    if args.fmt == "json":
        emit_json(report.to_dict())
    else:
        render_locality(report, sys.stdout)
    return 0 if report.bell_local else 1


def cmd_check_signal(args) -> int:
    model, _ = _load(args.spec)
    report = check_signal_locality(model, args.tol)
    if args.fmt == "json":
        emit_json(report.to_dict())
    else:
        render_signal(report, sys.stdout)
    return 0 if report.signal_local else 1


def cmd_check_anticorrelation(args) -> int:
    model, _ = _load(args.spec)
    axes = _parse_axes_arg(model, args.axes)
    report = check_anticorrelation(model, axes, args.tol)
    if args.fmt == "json":
        emit_json(report.to_dict())
    else:
        render_anticorr(report, sys.stdout)
    return 0 if report.holds else 1


def cmd_derive_instructions(args) -> int:
    model, _ = _load(args.spec)
    axes = _parse_axes_arg(model, args.axes)
    result = derive_instruction_sets(model, axes, args.tol)
    if isinstance(result, DerivationFailure):
        if args.fmt == "json":
            emit_json({"derived": False, "failure": result.to_dict()})
        else:
            render_instructions(result, None, sys.stdout)
        return 1
    partition = classify_states(result)
    if args.fmt == "json":
        emit_json(
            {
                "derived": True,
                "instructions": result.to_dict(),
                "partition": partition.to_dict(),
            }
        )
    else:
        render_instructions(result, partition, sys.stdout)
    return 0


def _run_bell_tests(model: TheoryModel, args) -> BellTestResult:
    table = behavior(model, args.tol)
    chsh_result = None
    if args.chsh:
        roles = _parse_roles(args.chsh)
        chsh_result = chsh(table, *roles, tol=args.tol)
    bell_result = None
    if args.bell1964:
        names = [s.strip() for s in args.bell1964.split(",")]
        if len(names) != 3:
            raise BellLabError(f"--bell1964 needs three axes, got {len(names)}")
        axes = resolve_axes(model.scenario, names)
        bell_result = bell1964(table, (axes[0], axes[1], axes[2]), tol=args.tol)
    membership = None
    if args.membership:
        membership = local_polytope_membership(table, model.scenario, tol=args.tol)
    return BellTestResult(
        correlators=all_correlators(table),
        chsh=chsh_result,
        bell1964=bell_result,
        membership=membership,
    )


def cmd_bell_test(args) -> int:
    model, _ = _load(args.spec)
    result = _run_bell_tests(model, args)
    if args.fmt == "json":
        emit_json(result.to_dict())
    else:
        render_bell_tests(result, sys.stdout)
    return 0


def _parse_policy(model: TheoryModel, text: str):
    if text == "uniform":
        return UniformSettingPolicy()
    if text.startswith("sequence:"):
        path = text[len("sequence:"):]
        pairs = []
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = [p.strip() for p in line.split(",")]
                if len(parts) != 2:
                    raise BellLabError(
                        f"{path}:{line_no}: expected 'aId,bId', got {line!r}"
                    )
                pairs.append((parts[0], parts[1]))
        if not pairs:
            raise BellLabError(f"{path}: empty setting sequence")
        return FixedSequencePolicy(pairs=tuple(pairs))
    raise BellLabError(f"policy must be 'uniform' or 'sequence:<file>', got {text!r}")


def cmd_simulate(args) -> int:
    model, _ = _load(args.spec)
    policy = _parse_policy(model, args.policy)
    records = run_experiment(model, args.trials, args.seed, policy=policy)
    roles = _parse_roles(args.chsh_roles) if args.chsh_roles else None
    stats = summarize(records, model.scenario, chsh_roles=roles, seed=args.seed)
    if args.out:
        write_records_csv(records, args.out, reveal_hidden=args.reveal_lambda)
    if args.fmt == "json":
        emit_json(stats.to_dict())
    else:
        render_stats(stats, sys.stdout)
        if args.out:
            sys.stdout.write(f"  records written to {args.out}\n")
    return 0


def cmd_make_singlet(args) -> int:
    model = make_planar_singlet(args.alice, args.bob, name=args.name)
    if args.out:
        dump_theory(model, args.out)
        sys.stdout.write(f"singlet spec written to {args.out}\n")
    else:
        emit_json(theory_to_dict(model))
    return 0


@dataclass(frozen=True)
class RunReport:
    """Everything the pipeline learned about one spec file."""

    tool_version: str
    input_path: str
    input_sha256: str
    model_name: str
    sections: dict[str, Any]

    def to_dict(self) -> dict:
        return {
            "tool": {"name": PROG, "version": self.tool_version},
            "input": {"path": self.input_path, "sha256": self.input_sha256},
            "model": self.model_name,
            "sections": self.sections,
        }


def run_pipeline(spec_path: str, args) -> RunReport:
    model, raw = _load(spec_path)
    digest = hashlib.sha256(raw).hexdigest()
    sections: dict[str, Any] = {}

    violations = validate_theory(model, args.tol)
    sections["validation"] = {
        "valid": not violations,
        "violations": [{"location": v.location, "message": v.message} for v in violations],
    }
    if violations:
        return RunReport(__version__, spec_path, digest, model.name, sections)

    sections["bell_locality"] = check_bell_locality(model, args.tol).to_dict()
    sections["signal_locality"] = check_signal_locality(model, args.tol).to_dict()

    axes = _parse_axes_arg(model, args.axes)
    try:
        sections["anticorrelation"] = check_anticorrelation(model, axes, args.tol).to_dict()
    except EqualAxisError as exc:
        sections["anticorrelation"] = {"skipped": str(exc)}

    try:
        derived = derive_instruction_sets(model, axes, args.tol)
        if isinstance(derived, DerivationFailure):
            sections["instructions"] = {"derived": False, "failure": derived.to_dict()}
        else:
            sections["instructions"] = {
                "derived": True,
                "instructions": derived.to_dict(),
                "partition": classify_states(derived).to_dict(),
            }
    except EqualAxisError as exc:
        sections["instructions"] = {"skipped": str(exc)}

    table = behavior(model, args.tol)
    bell: dict[str, Any] = {
        "correlators": {
            f"{a}|{b}": format_probability(v) for (a, b), v in all_correlators(table).items()
        }
    }
    if args.chsh:
        bell["chsh"] = chsh(table, *_parse_roles(args.chsh), tol=args.tol).to_dict()
    elif len(model.scenario.alice_settings) == 2 and len(model.scenario.bob_settings) == 2:
        a1, a2 = model.scenario.alice_ids()
        b1, b2 = model.scenario.bob_ids()
        bell["chsh"] = chsh(table, a1, a2, b1, b2, tol=args.tol).to_dict()
    else:
        bell["chsh"] = {"skipped": "no roles given and scenario is not two-by-two"}
    if args.bell1964:
        names = [s.strip() for s in args.bell1964.split(",")]
        try:
            axes3 = resolve_axes(model.scenario, names)
            bell["bell1964"] = bell1964(table, (axes3[0], axes3[1], axes3[2]), tol=args.tol).to_dict()
        except (AntiCorrelationPreconditionError, ScenarioShapeError, BellLabError) as exc:
            bell["bell1964"] = {"skipped": str(exc)}
    else:
        bell["bell1964"] = {"skipped": "no axes given (--bell1964)"}
    try:
        bell["membership"] = local_polytope_membership(table, model.scenario, tol=args.tol).to_dict()
    except EnumerationLimitError as exc:
        bell["membership"] = {"skipped": str(exc)}
    sections["bell_tests"] = bell

    if args.simulate_trials > 0:
        records = run_experiment(model, args.simulate_trials, args.seed)
        stats = summarize(records, model.scenario, seed=args.seed)
        sections["simulation"] = stats.to_dict()
    else:
        sections["simulation"] = {"skipped": "not requested (--simulate-trials)"}
    return RunReport(__version__, spec_path, digest, model.name, sections)


def render_report(report: RunReport, out) -> None:
    out.write(f"{PROG} {report.tool_version} report\n")
    out.write(f"input: {report.input_path} (sha256 {report.input_sha256[:16]}...)\n")
    out.write(f"model: {report.model_name}\n")
    for name, payload in report.sections.items():
        out.write(f"\n== {name} ==\n")
        if isinstance(payload, dict) and "skipped" in payload:
            out.write(f"skipped: {payload['skipped']}\n")
        else:
            emit_json(payload, out)


def cmd_report(args) -> int:
    report = run_pipeline(args.spec, args)
    if args.fmt == "json":
        emit_json(report.to_dict())
    else:
        render_report(report, sys.stdout)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None,
                        help="comparison tolerance (default: exact for rational models, 1e-9 otherwise)")
    common.add_argument("--format", dest="fmt", choices=("text", "json"), default="text",
                        help="output format")
    common.add_argument("--seed", type=int, default=0, help="random seed for simulations")

    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Audit hidden-state theories for locality, derive instruction sets, "
                    "run Bell tests, and simulate EPRB experiments.",
    )
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check model invariants")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("check-locality", parents=[common], help="audit Bell locality")
    p.add_argument("spec")
    p.set_defaults(func=cmd_check_locality)

    p = sub.add_parser("check-signal", parents=[common], help="audit signal locality")
    p.add_argument("spec")
    p.set_defaults(func=cmd_check_signal)

    p = sub.add_parser("check-anticorrelation", parents=[common],
                       help="audit perfect anti-correlation on equal axes")
    p.add_argument("spec")
    p.add_argument("--axes", help="comma-separated axes: 'a1=b1,a2=b2' or bare shared ids")
    p.set_defaults(func=cmd_check_anticorrelation)

    p = sub.add_parser("derive-instructions", parents=[common],
                       help="derive per-state instruction sets and the class partition")
    p.add_argument("spec")
    p.add_argument("--axes", help="comma-separated axes (default: auto-detect by vector)")
    p.set_defaults(func=cmd_derive_instructions)

    p = sub.add_parser("bell-test", parents=[common], help="CHSH, three-axis inequality, membership")
    p.add_argument("spec")
    p.add_argument("--chsh", metavar="A,A2:B,B2", help="CHSH roles (a, a_prime : b, b_prime)")
    p.add_argument("--bell1964", metavar="AX1,AX2,AX3", help="three axes for the 1964 inequality")
    p.add_argument("--membership", action="store_true", help="decide local-polytope membership")
    p.set_defaults(func=cmd_bell_test)

    p = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo EPRB experiment")
    p.add_argument("spec")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--policy", default="uniform", help="'uniform' or 'sequence:<file>'")
    p.add_argument("--out", help="write per-trial records to this CSV file")
    p.add_argument("--reveal-lambda", action="store_true",
                   help="include the hidden-state column in the CSV (pedagogy only)")
    p.add_argument("--chsh-roles", metavar="A,A2:B,B2", help="roles for the CHSH estimate")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="full pipeline over one spec")
    p.add_argument("spec")
    p.add_argument("--axes", help="axes for anti-correlation and derivation")
    p.add_argument("--chsh", metavar="A,A2:B,B2", help="CHSH roles")
    p.add_argument("--bell1964", metavar="AX1,AX2,AX3", help="axes for the 1964 inequality")
    p.add_argument("--simulate-trials", type=int, default=0,
                   help="also simulate this many trials (0 = skip)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("make-singlet", parents=[common],
                       help="write a quantum singlet spec from planar angles")
    p.add_argument("--alice", required=True, metavar="ID=DEG,...",
                   help="Alice settings as 'a1=0,a2=90' (x-z plane angles in degrees)")
    p.add_argument("--bob", required=True, metavar="ID=DEG,...", help="Bob settings")
    p.add_argument("--name", default="quantum singlet")
    p.add_argument("--out", help="output path (default: print to stdout)")
    p.set_defaults(func=cmd_make_singlet)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecFormatError, BellLabError) as exc:
        sys.stderr.write(f"{PROG}: error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"{PROG}: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
