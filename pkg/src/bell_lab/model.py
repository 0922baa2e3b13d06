"""Core data model for candidate hidden-state theories.

A theory is a finite ensemble of hidden states, each carrying a weight and a
conditional outcome kernel: for every hidden state and every pair of detector
settings (one per wing), a distribution over the four joint outcomes
(A, B) with A, B in {+1, -1}.  Averaging the kernel over the ensemble yields
the observable behavior P(A, B | a, b).

Probabilities come in two flavors and the distinction is load-bearing:

* exact rationals (`fractions.Fraction`), on which checks demand exact zeros;
* decimal floats, on which checks apply a tolerance (default 1e-9).

A model is *exact* when every weight and every kernel entry is a Fraction.
Mixed models are treated as decimal.  All containers are frozen; functions
here are pure and never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

Prob = Fraction | float

OUTCOMES: tuple[int, int] = (+1, -1)

#: Joint outcomes in canonical order; also the order of cell keys "++", "+-", ...
JOINT_OUTCOMES: tuple[tuple[int, int], ...] = ((+1, +1), (+1, -1), (-1, +1), (-1, -1))

DEFAULT_TOL = 1e-9

_UNIT_NORM_TOL = 1e-9


class BellLabError(Exception):
    """Base class for errors raised by this package."""


class UnknownIdError(BellLabError):
    """A referenced setting or hidden-state id does not exist."""


class InvalidModelError(BellLabError):
    """A theory model failed validation; carries the full violation report."""

    def __init__(self, violations: tuple[Violation, ...]):
        self.violations = violations
        lines = "; ".join(f"{v.location}: {v.message}" for v in violations[:5])
        more = "" if len(violations) <= 5 else f" (+{len(violations) - 5} more)"
        super().__init__(f"invalid theory model: {lines}{more}")


def parse_probability(value: object, where: str = "probability") -> Prob:
    """Convert a JSON-ish value into a probability.

    Ints and "p/q" strings become exact Fractions; other numbers become
    floats.  Denominators must be positive and values must not be NaN.
    """
    if isinstance(value, bool):
        raise ValueError(f"{where}: expected a number or 'p/q' string, got a bool")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise ValueError(f"{where}: must be finite, got {value!r}")
        return value
    if isinstance(value, str):
        parts = value.split("/")
        if len(parts) != 2:
            raise ValueError(f"{where}: rational strings must look like 'p/q', got {value!r}")
        try:
            num, den = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"{where}: non-integer term in {value!r}") from exc
        if den <= 0:
            raise ValueError(f"{where}: denominator must be positive in {value!r}")
        return Fraction(num, den)
    raise ValueError(f"{where}: expected a number or 'p/q' string, got {type(value).__name__}")


def format_probability(value: Prob) -> object:
    """Inverse of parse_probability for serialization: Fractions to 'p/q' or int."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return int(value)
        return f"{value.numerator}/{value.denominator}"
    return value


def is_exact(value: Prob) -> bool:
    return isinstance(value, Fraction)


@dataclass(frozen=True)
class Setting:
    """One detector setting on one wing; `direction` is an optional unit vector."""

    id: str
    direction: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class Scenario:
    """Measurement scenario: the settings available to each wing.

    Outcomes are fixed at {+1, -1} per wing.  Setting ids must be unique
    within their wing; the same id may appear on both wings (handy for
    shared-axis scenarios).
    """

    alice_settings: tuple[Setting, ...]
    bob_settings: tuple[Setting, ...]

    def alice_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.alice_settings)

    def bob_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.bob_settings)

    def alice_setting(self, setting_id: str) -> Setting:
        for s in self.alice_settings:
            if s.id == setting_id:
                return s
        raise UnknownIdError(f"unknown Alice setting id {setting_id!r}")

    def bob_setting(self, setting_id: str) -> Setting:
        for s in self.bob_settings:
            if s.id == setting_id:
                return s
        raise UnknownIdError(f"unknown Bob setting id {setting_id!r}")

    def pairs(self) -> list[tuple[str, str]]:
        """All (alice_id, bob_id) setting pairs in declaration order."""
        return [(a.id, b.id) for a in self.alice_settings for b in self.bob_settings]


@dataclass(frozen=True)
class EnsembleEntry:
    state_id: str
    weight: Prob


@dataclass(frozen=True)
class HiddenStateEnsemble:
    """Finite collection of hidden states with strictly positive weights."""

    entries: tuple[EnsembleEntry, ...]

    def state_ids(self) -> tuple[str, ...]:
        return tuple(e.state_id for e in self.entries)

    def weight_of(self, state_id: str) -> Prob:
        for e in self.entries:
            if e.state_id == state_id:
                return e.weight
        raise UnknownIdError(f"unknown hidden-state id {state_id!r}")


@dataclass(frozen=True)
class OutcomeDistribution:
    """Distribution over the four joint outcomes of one (state, a, b) cell.

    Field names spell the outcome pair: `pm` is P(A=+1, B=-1), etc.
    """

    pp: Prob
    pm: Prob
    mp: Prob
    mm: Prob

    def prob(self, outcome_a: int, outcome_b: int) -> Prob:
        try:
            return {(1, 1): self.pp, (1, -1): self.pm, (-1, 1): self.mp, (-1, -1): self.mm}[
                (outcome_a, outcome_b)
            ]
        except KeyError:
            raise ValueError(f"outcomes must be +1 or -1, got ({outcome_a}, {outcome_b})") from None

    def marginal_a(self, outcome_a: int) -> Prob:
        return self.prob(outcome_a, +1) + self.prob(outcome_a, -1)

    def marginal_b(self, outcome_b: int) -> Prob:
        return self.prob(+1, outcome_b) + self.prob(-1, outcome_b)

    def total(self) -> Prob:
        return self.pp + self.pm + self.mp + self.mm

    def values(self) -> tuple[Prob, Prob, Prob, Prob]:
        return (self.pp, self.pm, self.mp, self.mm)

    def as_dict(self) -> dict[str, Prob]:
        return {"++": self.pp, "+-": self.pm, "-+": self.mp, "--": self.mm}

    @staticmethod
    def from_mapping(cells: Mapping[str, Prob]) -> OutcomeDistribution:
        return OutcomeDistribution(
            pp=cells["++"], pm=cells["+-"], mp=cells["-+"], mm=cells["--"]
        )

    @staticmethod
    def point(outcome_a: int, outcome_b: int) -> OutcomeDistribution:
        """Deterministic cell: all mass on one joint outcome, exact."""
        one, zero = Fraction(1), Fraction(0)
        vals = {
            (a, b): (one if (a, b) == (outcome_a, outcome_b) else zero)
            for a, b in JOINT_OUTCOMES
        }
        return OutcomeDistribution(vals[(1, 1)], vals[(1, -1)], vals[(-1, 1)], vals[(-1, -1)])


@dataclass(frozen=True)
class ResponseKernel:
    """Per-state conditional outcome distributions, keyed (state_id, a_id, b_id)."""

    cells: Mapping[tuple[str, str, str], OutcomeDistribution]

    def cell(self, state_id: str, a_id: str, b_id: str) -> OutcomeDistribution:
        try:
            return self.cells[(state_id, a_id, b_id)]
        except KeyError:
            raise UnknownIdError(
                f"kernel has no cell for (state={state_id!r}, a={a_id!r}, b={b_id!r})"
            ) from None


@dataclass(frozen=True)
class TheoryModel:
    name: str
    scenario: Scenario
    ensemble: HiddenStateEnsemble
    kernel: ResponseKernel

    @property
    def is_exact(self) -> bool:
        """True iff every weight and kernel entry is an exact Fraction."""
        for e in self.ensemble.entries:
            if not is_exact(e.weight):
                return False
        for dist in self.kernel.cells.values():
            if not all(is_exact(p) for p in dist.values()):
                return False
        return True


@dataclass(frozen=True)
class BehaviorTable:
    """Observable behavior: ensemble-averaged joint distributions per setting pair."""

    scenario: Scenario
    cells: Mapping[tuple[str, str], OutcomeDistribution]

    def cell(self, a_id: str, b_id: str) -> OutcomeDistribution:
        try:
            return self.cells[(a_id, b_id)]
        except KeyError:
            raise UnknownIdError(f"behavior has no cell for (a={a_id!r}, b={b_id!r})") from None


@dataclass(frozen=True)
class Violation:
    """One validation failure, located by a dotted path into the model."""

    location: str
    message: str


def resolve_tolerance(model_or_exact: TheoryModel | bool, tol: float | None) -> float:
    """Tolerance for comparisons: explicit wins; else 0 (exact) or DEFAULT_TOL."""
    if tol is not None:
        return tol
    exact = model_or_exact.is_exact if isinstance(model_or_exact, TheoryModel) else model_or_exact
    return 0.0 if exact else DEFAULT_TOL


def _check_unit(direction: tuple[float, float, float], where: str, out: list[Violation]) -> None:
    norm = math.sqrt(sum(c * c for c in direction))
    if abs(norm - 1.0) > _UNIT_NORM_TOL:
        out.append(Violation(where, f"direction must be a unit vector, norm is {norm!r}"))


def validate_theory(model: TheoryModel, tol: float | None = None) -> list[Violation]:
    """Check every structural invariant; an empty list means the model is valid.

    Exact quantities are held to exact equalities; decimal ones to `tol`
    (default 1e-9).  Every violation is reported, not just the first.
    """
    out: list[Violation] = []
    t = resolve_tolerance(model, tol)
    scen = model.scenario

    if not scen.alice_settings:
        out.append(Violation("scenario.alice_settings", "at least one setting required"))
    if not scen.bob_settings:
        out.append(Violation("scenario.bob_settings", "at least one setting required"))
    for side, settings in (("alice", scen.alice_settings), ("bob", scen.bob_settings)):
        seen: set[str] = set()
        for s in settings:
            if s.id in seen:
                out.append(Violation(f"scenario.{side}_settings[{s.id}]", "duplicate setting id"))
            seen.add(s.id)
            if s.direction is not None:
                _check_unit(s.direction, f"scenario.{side}_settings[{s.id}].direction", out)

    if not model.ensemble.entries:
        out.append(Violation("ensemble", "at least one hidden state required"))
    seen_states: set[str] = set()
    weight_sum: Prob = Fraction(0)
    for e in model.ensemble.entries:
        if e.state_id in seen_states:
            out.append(Violation(f"ensemble[{e.state_id}]", "duplicate hidden-state id"))
        seen_states.add(e.state_id)
        if e.weight <= 0:
            out.append(
                Violation(f"ensemble[{e.state_id}].weight", f"weight must be > 0, got {e.weight}")
            )
        weight_sum = weight_sum + e.weight
    if model.ensemble.entries:
        if isinstance(weight_sum, Fraction):
            if weight_sum != 1:
                out.append(Violation("ensemble", f"weights must sum to 1 exactly, got {weight_sum}"))
        elif abs(weight_sum - 1.0) > t:
            out.append(Violation("ensemble", f"weights must sum to 1 within {t}, got {weight_sum!r}"))

    expected = {
        (e.state_id, a.id, b.id)
        for e in model.ensemble.entries
        for a in scen.alice_settings
        for b in scen.bob_settings
    }
    for key in expected:
        if key not in model.kernel.cells:
            out.append(
                Violation(
                    f"kernel[{key[0]},{key[1]},{key[2]}]",
                    "missing cell: every (state, a, b) needs an outcome distribution",
                )
            )
    for key, dist in model.kernel.cells.items():
        loc = f"kernel[{key[0]},{key[1]},{key[2]}]"
        if key not in expected:
            out.append(Violation(loc, "cell references ids outside the scenario or ensemble"))
            continue
        for label, p in dist.as_dict().items():
            if isinstance(p, Fraction):
                if p < 0 or p > 1:
                    out.append(Violation(f"{loc}.{label}", f"probability out of [0,1]: {p}"))
            elif p < -t or p > 1 + t:
                out.append(Violation(f"{loc}.{label}", f"probability out of [0,1]: {p!r}"))
        total = dist.total()
        if isinstance(total, Fraction):
            if total != 1:
                out.append(Violation(loc, f"cell must sum to 1 exactly, got {total}"))
        elif abs(total - 1.0) > t:
            out.append(Violation(loc, f"cell must sum to 1 within {t}, got {total!r}"))
    return out


def require_valid(model: TheoryModel, tol: float | None = None) -> None:
    violations = validate_theory(model, tol)
    if violations:
        raise InvalidModelError(tuple(violations))


def behavior(model: TheoryModel, tol: float | None = None) -> BehaviorTable:
    """Ensemble-average the kernel into the observable behavior table.

    Exactness propagates: an all-rational model yields all-rational cells.
    Raises InvalidModelError if the model fails validation.
    """
    require_valid(model, tol)
    cells: dict[tuple[str, str], OutcomeDistribution] = {}
    for a in model.scenario.alice_settings:
        for b in model.scenario.bob_settings:
            acc: list[Prob] = [Fraction(0)] * 4
            for e in model.ensemble.entries:
                dist = model.kernel.cell(e.state_id, a.id, b.id)
                for i, p in enumerate(dist.values()):
                    acc[i] = acc[i] + e.weight * p
            cells[(a.id, b.id)] = OutcomeDistribution(*acc)
    return BehaviorTable(scenario=model.scenario, cells=cells)


def conditional_marginal(
    model: TheoryModel,
    side: str,
    outcome: int,
    own_setting: str,
    far_setting: str,
    state_id: str,
    far_outcome: int | None = None,
    tol: float | None = None,
) -> Prob | None:
    """Kernel-level conditional for one hidden state.

    With `far_outcome` given: P(own outcome | both settings, far outcome, state).
    Without: the plain marginal P(own outcome | both settings, state).
    Returns None when the conditioning event has probability 0 (never 0/0).
    """
    if side not in ("alice", "bob"):
        raise ValueError(f"side must be 'alice' or 'bob', got {side!r}")
    model.ensemble.weight_of(state_id)
    if side == "alice":
        a_id, b_id = own_setting, far_setting
        model.scenario.alice_setting(a_id)
        model.scenario.bob_setting(b_id)
    else:
        a_id, b_id = far_setting, own_setting
        model.scenario.alice_setting(a_id)
        model.scenario.bob_setting(b_id)
    dist = model.kernel.cell(state_id, a_id, b_id)
    t = resolve_tolerance(model, tol)
    if far_outcome is None:
        return dist.marginal_a(outcome) if side == "alice" else dist.marginal_b(outcome)
    if side == "alice":
        denom = dist.marginal_b(far_outcome)
        joint = dist.prob(outcome, far_outcome)
    else:
        denom = dist.marginal_a(far_outcome)
        joint = dist.prob(far_outcome, outcome)
    if denom <= t:
        return None
    return joint / denom


def swap_sides(model: TheoryModel) -> TheoryModel:
    """Mirror the model: wings exchanged, kernel cells transposed."""
    scen = Scenario(
        alice_settings=model.scenario.bob_settings,
        bob_settings=model.scenario.alice_settings,
    )
    cells = {
        (state_id, b_id, a_id): OutcomeDistribution(
            pp=dist.pp, pm=dist.mp, mp=dist.pm, mm=dist.mm
        )
        for (state_id, a_id, b_id), dist in model.kernel.cells.items()
    }
    return TheoryModel(
        name=f"{model.name} (sides swapped)",
        scenario=scen,
        ensemble=model.ensemble,
        kernel=ResponseKernel(cells),
    )
