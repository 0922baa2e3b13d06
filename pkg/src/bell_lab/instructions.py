"""Deterministic instruction sets forced by locality plus anti-correlation.

If a theory is Bell Local and perfectly anti-correlated on a set of shared
axes, then for every hidden state that occurs with nonzero probability each
wing's outcome on each axis must already be fixed: a marginal strictly
between 0 and 1 on either wing would put nonzero probability on a
same-outcome event through the factorized joint.  Each hidden state
therefore carries an instruction set: a sign per axis for Alice, with Bob's
sign the negation.  Over n axes there are exactly 2^n possible sign
patterns, so the ensemble splits into 2^n classes (some possibly empty).

`derive_instruction_sets` mechanizes exactly that step and returns a
structured `DerivationFailure` naming the first blocking marginal instead
of raising, because a failed derivation is a finding, not a crash.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .audit import EqualAxisError, auto_equal_axes
from .model import (
    BellLabError,
    EnsembleEntry,
    HiddenStateEnsemble,
    OutcomeDistribution,
    Prob,
    ResponseKernel,
    Scenario,
    TheoryModel,
    format_probability,
    require_valid,
    resolve_tolerance,
)

Axis = tuple[str, str]

_MAX_AXES = 16


class InstructionSetError(BellLabError):
    """An instruction set is malformed or does not cover the scenario."""


@dataclass(frozen=True)
class InstructionSet:
    """Per-state deterministic outcomes on shared axes.

    `assignments` maps state_id -> axis -> (alice_value, bob_value); the
    bob value must be the negation of the alice value on every axis, and
    every state must cover every axis.  Settings outside the listed axes
    are simply absent: nothing constrains them.
    """

    axes: tuple[Axis, ...]
    assignments: dict[str, dict[Axis, tuple[int, int]]]
    weights: dict[str, Prob]

    def __post_init__(self) -> None:
        if len(set(self.axes)) != len(self.axes):
            raise InstructionSetError("duplicate axes in instruction set")
        if set(self.assignments) != set(self.weights):
            raise InstructionSetError("assignments and weights must cover the same states")
        for state_id, per_axis in self.assignments.items():
            if set(per_axis) != set(self.axes):
                raise InstructionSetError(
                    f"state {state_id!r} must assign every axis exactly once"
                )
            for axis, (a_val, b_val) in per_axis.items():
                if a_val not in (+1, -1) or b_val not in (+1, -1):
                    raise InstructionSetError(
                        f"state {state_id!r}, axis {axis}: outcomes must be +1 or -1"
                    )
                if b_val != -a_val:
                    raise InstructionSetError(
                        f"state {state_id!r}, axis {axis}: anti-correlation requires "
                        f"bob = -alice, got ({a_val}, {b_val})"
                    )

    def state_ids(self) -> tuple[str, ...]:
        return tuple(self.assignments)

    def pattern(self, state_id: str, axes: tuple[Axis, ...] | None = None) -> tuple[int, ...]:
        """Alice's sign per axis, in axis order."""
        use = self.axes if axes is None else axes
        per_axis = self.assignments[state_id]
        return tuple(per_axis[axis][0] for axis in use)

    def to_dict(self) -> dict:
        return {
            "axes": [list(axis) for axis in self.axes],
            "states": {
                state_id: {
                    "weight": format_probability(self.weights[state_id]),
                    "outcomes": {
                        f"{axis[0]}|{axis[1]}": list(vals) for axis, vals in per_axis.items()
                    },
                }
                for state_id, per_axis in self.assignments.items()
            },
        }


@dataclass(frozen=True)
class DerivationFailure:
    """First obstruction found while deriving instruction sets.

    `marginal` is the offending own-outcome probability: a value strictly
    between 0 and 1 (determinism fails), or one that moves with the far
    setting, or one contradicting anti-correlation across the axis.
    """

    state_id: str
    axis: Axis
    side: str
    marginal: Prob
    reason: str

    def to_dict(self) -> dict:
        return {
            "state": self.state_id,
            "axis": list(self.axis),
            "side": self.side,
            "marginal": format_probability(self.marginal),
            "reason": self.reason,
        }


def _resolve_sign(value: Prob, tol: float) -> int | None:
    """+1 / -1 when `value` is within tol of 1 / 0, else None."""
    if value >= 1 - tol:
        return +1
    if value <= tol:
        return -1
    return None


def derive_instruction_sets(
    model: TheoryModel,
    axes: list[Axis] | None = None,
    tol: float | None = None,
) -> InstructionSet | DerivationFailure:
    """Extract per-state deterministic instructions on the given axes.

    For each state and axis the own-outcome marginal on each wing must be
    independent of the far setting, within tolerance of 0 or 1, and the two
    wings must disagree in sign.  The first breach is returned as a
    DerivationFailure; otherwise the full instruction set with ensemble
    weights attached.
    """
    require_valid(model, tol)
    t = resolve_tolerance(model, tol)
    if axes is None:
        axes = auto_equal_axes(model.scenario)
    if not axes:
        raise EqualAxisError(
            "no axes to derive on: declare equal-axis pairs or give settings matching vectors"
        )
    for a_id, b_id in axes:
        model.scenario.alice_setting(a_id)
        model.scenario.bob_setting(b_id)

    assignments: dict[str, dict[Axis, tuple[int, int]]] = {}
    weights: dict[str, Prob] = {}
    for entry in model.ensemble.entries:
        state = entry.state_id
        per_axis: dict[Axis, tuple[int, int]] = {}
        for axis in axes:
            a_id, b_id = axis
            alice_margs = [
                model.kernel.cell(state, a_id, far.id).marginal_a(+1)
                for far in model.scenario.bob_settings
            ]
            if max(alice_margs) - min(alice_margs) > t:
                return DerivationFailure(
                    state, axis, "alice", max(alice_margs),
                    "own-outcome marginal moves with the far setting",
                )
            bob_margs = [
                model.kernel.cell(state, far.id, b_id).marginal_b(+1)
                for far in model.scenario.alice_settings
            ]
            if max(bob_margs) - min(bob_margs) > t:
                return DerivationFailure(
                    state, axis, "bob", max(bob_margs),
                    "own-outcome marginal moves with the far setting",
                )
            alice_marg = model.kernel.cell(state, a_id, b_id).marginal_a(+1)
            a_val = _resolve_sign(alice_marg, t)
            if a_val is None:
                return DerivationFailure(
                    state, axis, "alice", alice_marg,
                    "marginal strictly between 0 and 1: outcome not deterministic",
                )
            bob_marg = model.kernel.cell(state, a_id, b_id).marginal_b(+1)
            b_val = _resolve_sign(bob_marg, t)
            if b_val is None:
                return DerivationFailure(
                    state, axis, "bob", bob_marg,
                    "marginal strictly between 0 and 1: outcome not deterministic",
                )
            if b_val != -a_val:
                return DerivationFailure(
                    state, axis, "bob", bob_marg,
                    "anti-correlation fails: both wings fixed to the same sign",
                )
            per_axis[axis] = (a_val, b_val)
        assignments[state] = per_axis
        weights[state] = entry.weight
    return InstructionSet(axes=tuple(axes), assignments=assignments, weights=weights)


@dataclass(frozen=True)
class PatternClass:
    """All states sharing one Alice sign pattern across the axes."""

    pattern: tuple[int, ...]
    members: tuple[str, ...]
    weight: Prob

    @property
    def nonempty(self) -> bool:
        return bool(self.members)

    def label(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.pattern)

    def to_dict(self) -> dict:
        return {
            "pattern": self.label(),
            "members": list(self.members),
            "weight": format_probability(self.weight),
            "nonempty": self.nonempty,
        }


@dataclass(frozen=True)
class ClassPartition:
    """The full 2^n split of the ensemble by instruction pattern.

    Every pattern is listed, zero-weight classes included, so the count is
    always exactly 2^len(axes).
    """

    axes: tuple[Axis, ...]
    classes: tuple[PatternClass, ...]

    def class_for(self, pattern: tuple[int, ...]) -> PatternClass:
        for cls in self.classes:
            if cls.pattern == pattern:
                return cls
        raise KeyError(f"no class for pattern {pattern}")

    def nonempty_classes(self) -> tuple[PatternClass, ...]:
        return tuple(c for c in self.classes if c.nonempty)

    def total_weight(self) -> Prob:
        total: Prob = Fraction(0)
        for c in self.classes:
            total = total + c.weight
        return total

    def to_dict(self) -> dict:
        return {
            "axes": [list(axis) for axis in self.axes],
            "class_count": len(self.classes),
            "classes": [c.to_dict() for c in self.classes],
        }


def classify_states(
    instructions: InstructionSet, axes: tuple[Axis, ...] | None = None
) -> ClassPartition:
    """Group states by Alice's sign pattern over `axes` (default: all axes)."""
    use = instructions.axes if axes is None else tuple(axes)
    for axis in use:
        if axis not in instructions.axes:
            raise InstructionSetError(f"axis {axis} is not part of the instruction set")
    if len(use) > _MAX_AXES:
        raise InstructionSetError(
            f"refusing to enumerate 2^{len(use)} classes (limit 2^{_MAX_AXES})"
        )
    by_pattern: dict[tuple[int, ...], list[str]] = {}
    for state_id in instructions.state_ids():
        by_pattern.setdefault(instructions.pattern(state_id, use), []).append(state_id)
    classes = []
    for pattern in itertools.product((+1, -1), repeat=len(use)):
        members = tuple(by_pattern.get(pattern, ()))
        weight: Prob = Fraction(0)
        for m in members:
            weight = weight + instructions.weights[m]
        classes.append(PatternClass(pattern=pattern, members=members, weight=weight))
    return ClassPartition(axes=use, classes=tuple(classes))


def realize_model(
    instructions: InstructionSet,
    scenario: Scenario,
    name: str = "realized instruction model",
) -> TheoryModel:
    """Build the deterministic theory that plays out an instruction set.

    Every scenario setting must appear in exactly one axis on its wing;
    each kernel cell then puts probability 1 on the instructed outcome
    pair, exactly.
    """
    alice_axis: dict[str, Axis] = {}
    bob_axis: dict[str, Axis] = {}
    for axis in instructions.axes:
        a_id, b_id = axis
        if a_id in alice_axis:
            raise InstructionSetError(f"Alice setting {a_id!r} appears in two axes")
        if b_id in bob_axis:
            raise InstructionSetError(f"Bob setting {b_id!r} appears in two axes")
        alice_axis[a_id] = axis
        bob_axis[b_id] = axis
    for s in scenario.alice_settings:
        if s.id not in alice_axis:
            raise InstructionSetError(f"no instruction covers Alice setting {s.id!r}")
    for s in scenario.bob_settings:
        if s.id not in bob_axis:
            raise InstructionSetError(f"no instruction covers Bob setting {s.id!r}")

    cells: dict[tuple[str, str, str], OutcomeDistribution] = {}
    for state_id in instructions.state_ids():
        per_axis = instructions.assignments[state_id]
        for a in scenario.alice_settings:
            for b in scenario.bob_settings:
                a_val = per_axis[alice_axis[a.id]][0]
                b_val = per_axis[bob_axis[b.id]][1]
                cells[(state_id, a.id, b.id)] = OutcomeDistribution.point(a_val, b_val)
    ensemble = HiddenStateEnsemble(
        entries=tuple(
            EnsembleEntry(state_id=s, weight=instructions.weights[s])
            for s in instructions.state_ids()
        )
    )
    return TheoryModel(
        name=name, scenario=scenario, ensemble=ensemble, kernel=ResponseKernel(cells)
    )
