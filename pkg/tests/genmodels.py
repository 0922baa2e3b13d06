"""Shared builders and random generators for test models.

Seeded `numpy` generators drive the bulk-enumeration checks; hypothesis
strategies (kept here so every test module draws the same shapes) drive
the property tests.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from bell_lab.instructions import InstructionSet, realize_model
from bell_lab.model import (
    EnsembleEntry,
    HiddenStateEnsemble,
    OutcomeDistribution,
    ResponseKernel,
    Scenario,
    Setting,
    TheoryModel,
)


def shared_axis_scenario(n_axes: int) -> Scenario:
    settings = tuple(Setting(id=f"n{i + 1}") for i in range(n_axes))
    return Scenario(alice_settings=settings, bob_settings=settings)


def axes_for(n_axes: int) -> tuple[tuple[str, str], ...]:
    return tuple((f"n{i + 1}", f"n{i + 1}") for i in range(n_axes))


def fraction_simplex(rng: np.random.Generator, n: int) -> list[Fraction]:
    """n strictly positive exact weights summing to exactly 1."""
    parts = [int(rng.integers(1, 20)) for _ in range(n)]
    total = sum(parts)
    return [Fraction(p, total) for p in parts]


def random_anticorr_instructions(
    rng: np.random.Generator, n_axes: int, n_states: int
) -> InstructionSet:
    axes = axes_for(n_axes)
    assignments = {}
    weights = {}
    for i, w in enumerate(fraction_simplex(rng, n_states)):
        sid = f"s{i + 1}"
        pattern = [int(rng.choice((1, -1))) for _ in range(n_axes)]
        assignments[sid] = {axis: (s, -s) for axis, s in zip(axes, pattern)}
        weights[sid] = w
    return InstructionSet(axes=axes, assignments=assignments, weights=weights)


def random_anticorr_mixture(
    rng: np.random.Generator, n_axes: int, n_states: int
) -> TheoryModel:
    """Convex mixture of deterministic anti-correlated strategies, exact."""
    instr = random_anticorr_instructions(rng, n_axes, n_states)
    return realize_model(instr, shared_axis_scenario(n_axes), name="random anticorr mixture")


def _product_cell(qa_plus: float, rb_plus: float) -> OutcomeDistribution:
    qa = {+1: qa_plus, -1: 1.0 - qa_plus}
    rb = {+1: rb_plus, -1: 1.0 - rb_plus}
    return OutcomeDistribution(
        pp=qa[+1] * rb[+1], pm=qa[+1] * rb[-1], mp=qa[-1] * rb[+1], mm=qa[-1] * rb[-1]
    )


def random_product_model(
    rng: np.random.Generator, na: int, nb: int, n_states: int
) -> TheoryModel:
    """Every kernel cell factorizes, so the model is Bell Local by construction."""
    scenario = Scenario(
        alice_settings=tuple(Setting(id=f"a{i + 1}") for i in range(na)),
        bob_settings=tuple(Setting(id=f"b{i + 1}") for i in range(nb)),
    )
    weights = rng.dirichlet(np.ones(n_states))
    entries = tuple(
        EnsembleEntry(state_id=f"s{i + 1}", weight=float(w)) for i, w in enumerate(weights)
    )
    cells = {}
    for i in range(n_states):
        qa = {f"a{j + 1}": float(rng.random()) for j in range(na)}
        rb = {f"b{j + 1}": float(rng.random()) for j in range(nb)}
        for a_id, q in qa.items():
            for b_id, r in rb.items():
                cells[(f"s{i + 1}", a_id, b_id)] = _product_cell(q, r)
    return TheoryModel(
        name="random product model",
        scenario=scenario,
        ensemble=HiddenStateEnsemble(entries=entries),
        kernel=ResponseKernel(cells),
    )


def random_arbitrary_model(
    rng: np.random.Generator, na: int, nb: int, n_states: int
) -> TheoryModel:
    """Unconstrained valid model; usually neither Bell nor signal local."""
    scenario = Scenario(
        alice_settings=tuple(Setting(id=f"a{i + 1}") for i in range(na)),
        bob_settings=tuple(Setting(id=f"b{i + 1}") for i in range(nb)),
    )
    weights = rng.dirichlet(np.ones(n_states))
    entries = tuple(
        EnsembleEntry(state_id=f"s{i + 1}", weight=float(w)) for i, w in enumerate(weights)
    )
    cells = {}
    for i in range(n_states):
        for a in range(na):
            for b in range(nb):
                raw = rng.dirichlet(np.ones(4))
                cells[(f"s{i + 1}", f"a{a + 1}", f"b{b + 1}")] = OutcomeDistribution(
                    pp=float(raw[0]), pm=float(raw[1]), mp=float(raw[2]), mm=float(raw[3])
                )
    return TheoryModel(
        name="random arbitrary model",
        scenario=scenario,
        ensemble=HiddenStateEnsemble(entries=entries),
        kernel=ResponseKernel(cells),
    )


# ---------------------------------------------------------------------------
# hypothesis strategies


@st.composite
def exact_simplex(draw, n: int) -> list[Fraction]:
    parts = draw(st.lists(st.integers(1, 20), min_size=n, max_size=n))
    total = sum(parts)
    return [Fraction(p, total) for p in parts]


@st.composite
def anticorr_instruction_sets(draw, min_axes: int = 1, max_axes: int = 3) -> InstructionSet:
    n_axes = draw(st.integers(min_axes, max_axes))
    n_states = draw(st.integers(1, 6))
    axes = axes_for(n_axes)
    weights_list = draw(exact_simplex(n_states))
    assignments = {}
    weights = {}
    for i, w in enumerate(weights_list):
        sid = f"s{i + 1}"
        pattern = draw(
            st.lists(st.sampled_from((1, -1)), min_size=n_axes, max_size=n_axes)
        )
        assignments[sid] = {axis: (s, -s) for axis, s in zip(axes, pattern)}
        weights[sid] = w
    return InstructionSet(axes=axes, assignments=assignments, weights=weights)


@st.composite
def anticorr_mixtures(draw, min_axes: int = 1, max_axes: int = 3) -> TheoryModel:
    instr = draw(anticorr_instruction_sets(min_axes=min_axes, max_axes=max_axes))
    return realize_model(
        instr, shared_axis_scenario(len(instr.axes)), name="hypothesis anticorr mixture"
    )


_PROB_GRID = st.integers(0, 100).map(lambda k: k / 100.0)


@st.composite
def product_models(draw) -> TheoryModel:
    na = draw(st.integers(1, 3))
    nb = draw(st.integers(1, 3))
    n_states = draw(st.integers(1, 4))
    scenario = Scenario(
        alice_settings=tuple(Setting(id=f"a{i + 1}") for i in range(na)),
        bob_settings=tuple(Setting(id=f"b{i + 1}") for i in range(nb)),
    )
    weights_list = draw(exact_simplex(n_states))
    entries = tuple(
        EnsembleEntry(state_id=f"s{i + 1}", weight=w) for i, w in enumerate(weights_list)
    )
    cells = {}
    for i in range(n_states):
        qa = {f"a{j + 1}": draw(_PROB_GRID) for j in range(na)}
        rb = {f"b{j + 1}": draw(_PROB_GRID) for j in range(nb)}
        for a_id, q in qa.items():
            for b_id, r in rb.items():
                cells[(f"s{i + 1}", a_id, b_id)] = _product_cell(q, r)
    return TheoryModel(
        name="hypothesis product model",
        scenario=scenario,
        ensemble=HiddenStateEnsemble(entries=entries),
        kernel=ResponseKernel(cells),
    )


@st.composite
def arbitrary_models(draw) -> TheoryModel:
    na = draw(st.integers(1, 3))
    nb = draw(st.integers(1, 3))
    n_states = draw(st.integers(1, 3))
    scenario = Scenario(
        alice_settings=tuple(Setting(id=f"a{i + 1}") for i in range(na)),
        bob_settings=tuple(Setting(id=f"b{i + 1}") for i in range(nb)),
    )
    weights_list = draw(exact_simplex(n_states))
    entries = tuple(
        EnsembleEntry(state_id=f"s{i + 1}", weight=w) for i, w in enumerate(weights_list)
    )
    cells = {}
    for i in range(n_states):
        for a in range(na):
            for b in range(nb):
                parts = draw(st.lists(st.integers(0, 20), min_size=4, max_size=4).filter(sum))
                total = sum(parts)
                cells[(f"s{i + 1}", f"a{a + 1}", f"b{b + 1}")] = OutcomeDistribution(
                    pp=Fraction(parts[0], total),
                    pm=Fraction(parts[1], total),
                    mp=Fraction(parts[2], total),
                    mm=Fraction(parts[3], total),
                )
    return TheoryModel(
        name="hypothesis arbitrary model",
        scenario=scenario,
        ensemble=HiddenStateEnsemble(entries=entries),
        kernel=ResponseKernel(cells),
    )
