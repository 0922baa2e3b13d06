"""Bell tests on behavior tables: CHSH, the three-axis inequality, and
exact local-polytope membership.

Conventions, stated once and printed in reports:

* Correlator: E(a, b) = P(+,+) - P(+,-) - P(-,+) + P(-,-).
* CHSH: S = E(a,b) + E(a,b') + E(a',b) - E(a',b'), for named roles
  (a, a', b, b').  The local bound is brute-forced over all 16
  deterministic sign assignments on every call, never assumed.
* Three-axis inequality over axes (1, 2, 3), each axis an
  (alice_id, bob_id) pair: |E(1,2) - E(1,3)| <= 1 + E(2,3), valid for
  local models that are perfectly anti-correlated on each axis; the
  anti-correlation precondition is enforced before evaluating.

Membership in the local polytope is decided by exact rational feasibility
over the enumerated deterministic strategies: floats are converted to
Fractions exactly, and a phase-1 simplex with Bland's rule either returns
convex weights (inside) or a separating affine functional read off the
simplex multipliers (outside).  For two-setting scenarios an outside
verdict is first matched against the eight CHSH sign variants so the
certificate is recognizable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .model import (
    BehaviorTable,
    BellLabError,
    JOINT_OUTCOMES,
    DEFAULT_TOL,
    Prob,
    Scenario,
    format_probability,
    is_exact,
)

Axis = tuple[str, str]

CHSH_CONVENTION = "S = E(a,b) + E(a,b') + E(a',b) - E(a',b')"

_MAX_SETTINGS_PER_SIDE = 4


class ScenarioShapeError(BellLabError):
    """The scenario does not have the setting counts this test needs."""


class EnumerationLimitError(BellLabError):
    """Scenario too large for exhaustive deterministic-strategy enumeration."""


class AntiCorrelationPreconditionError(BellLabError):
    """The three-axis inequality was asked of a behavior that is not
    perfectly anti-correlated on its axes; use chsh for such behaviors."""


def table_is_exact(table: BehaviorTable) -> bool:
    return all(
        all(is_exact(p) for p in dist.values()) for dist in table.cells.values()
    )


def _table_tol(table: BehaviorTable, tol: float | None) -> float:
    if tol is not None:
        return tol
    return 0.0 if table_is_exact(table) else DEFAULT_TOL


def correlator(table: BehaviorTable, a_id: str, b_id: str) -> Prob:
    """E(a, b) = P(+,+) - P(+,-) - P(-,+) + P(-,-)."""
    dist = table.cell(a_id, b_id)
    return dist.pp - dist.pm - dist.mp + dist.mm


@dataclass(frozen=True)
class DeterministicStrategy:
    """One local deterministic response: a fixed sign per setting per wing."""

    alice: tuple[tuple[str, int], ...]
    bob: tuple[tuple[str, int], ...]

    @property
    def alice_map(self) -> dict[str, int]:
        return dict(self.alice)

    @property
    def bob_map(self) -> dict[str, int]:
        return dict(self.bob)

    def outcome_a(self, a_id: str) -> int:
        for sid, val in self.alice:
            if sid == a_id:
                return val
        raise BellLabError(f"strategy fixes no outcome for Alice setting {a_id!r}")

    def outcome_b(self, b_id: str) -> int:
        for sid, val in self.bob:
            if sid == b_id:
                return val
        raise BellLabError(f"strategy fixes no outcome for Bob setting {b_id!r}")

    def label(self) -> str:
        fmt = lambda pairs: ",".join(f"{sid}:{'+' if v > 0 else '-'}" for sid, v in pairs)
        return f"A[{fmt(self.alice)}] B[{fmt(self.bob)}]"


def enumerate_strategies(scenario: Scenario) -> list[DeterministicStrategy]:
    """All 2^(na) * 2^(nb) deterministic strategies, in a fixed order."""
    na, nb = len(scenario.alice_settings), len(scenario.bob_settings)
    if na > _MAX_SETTINGS_PER_SIDE or nb > _MAX_SETTINGS_PER_SIDE:
        raise EnumerationLimitError(
            f"enumeration limit: {na}x{nb} settings exceeds "
            f"{_MAX_SETTINGS_PER_SIDE} per side"
        )
    a_ids = scenario.alice_ids()
    b_ids = scenario.bob_ids()
    out = []
    for a_signs in itertools.product((+1, -1), repeat=na):
        for b_signs in itertools.product((+1, -1), repeat=nb):
            out.append(
                DeterministicStrategy(
                    alice=tuple(zip(a_ids, a_signs)), bob=tuple(zip(b_ids, b_signs))
                )
            )
    return out


def strategy_cell_prob(strategy: DeterministicStrategy, a_id: str, b_id: str, outcome_a: int, outcome_b: int) -> Fraction:
    hit = strategy.outcome_a(a_id) == outcome_a and strategy.outcome_b(b_id) == outcome_b
    return Fraction(1) if hit else Fraction(0)


def strategy_behavior(strategy: DeterministicStrategy, scenario: Scenario) -> BehaviorTable:
    from .model import OutcomeDistribution

    cells = {
        (a.id, b.id): OutcomeDistribution.point(
            strategy.outcome_a(a.id), strategy.outcome_b(b.id)
        )
        for a in scenario.alice_settings
        for b in scenario.bob_settings
    }
    return BehaviorTable(scenario=scenario, cells=cells)


def _chsh_sign_bound(signs: tuple[int, int, int, int]) -> int:
    """Brute-force max of s1*ab + s2*ab' + s3*a'b + s4*a'b' over signs in {+-1}^4."""
    best = None
    for a, a2, b, b2 in itertools.product((+1, -1), repeat=4):
        val = signs[0] * a * b + signs[1] * a * b2 + signs[2] * a2 * b + signs[3] * a2 * b2
        if best is None or val > best:
            best = val
    return best


@dataclass(frozen=True)
class CHSHResult:
    """CHSH evaluation under the fixed convention, with a brute-forced bound."""

    roles: tuple[str, str, str, str]
    correlators: dict[tuple[str, str], Prob]
    chsh_value: Prob
    local_bound: Prob
    violated: bool
    tolerance: float
    convention: str = CHSH_CONVENTION

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "roles": {"a": self.roles[0], "a_prime": self.roles[1], "b": self.roles[2], "b_prime": self.roles[3]},
            "correlators": {f"{k[0]}|{k[1]}": format_probability(v) for k, v in self.correlators.items()},
            "chsh_value": format_probability(self.chsh_value),
            "local_bound": format_probability(self.local_bound),
            "violated": self.violated,
            "tolerance": self.tolerance,
        }


def chsh(
    table: BehaviorTable,
    a: str,
    a_prime: str,
    b: str,
    b_prime: str,
    tol: float | None = None,
) -> CHSHResult:
    """Evaluate S for the given roles and compare against the local bound.

    The bound is recomputed by exhausting all 16 deterministic sign
    assignments to the four role settings.
    """
    t = _table_tol(table, tol)
    pairs = [(a, b), (a, b_prime), (a_prime, b), (a_prime, b_prime)]
    corr = {pair: correlator(table, *pair) for pair in pairs}
    value = corr[(a, b)] + corr[(a, b_prime)] + corr[(a_prime, b)] - corr[(a_prime, b_prime)]
    bound = Fraction(_chsh_sign_bound((+1, +1, +1, -1)))
    return CHSHResult(
        roles=(a, a_prime, b, b_prime),
        correlators=corr,
        chsh_value=value,
        local_bound=bound,
        violated=abs(value) - bound > t,
        tolerance=t,
    )


@dataclass(frozen=True)
class LocalBoundResult:
    """Exhaustive |S| maximum over every deterministic strategy of a 2x2 scenario."""

    bound: Prob
    achievers: tuple[DeterministicStrategy, ...]
    values: dict[DeterministicStrategy, Prob]
    roles: tuple[str, str, str, str]
    convention: str = CHSH_CONVENTION

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "roles": {"a": self.roles[0], "a_prime": self.roles[1], "b": self.roles[2], "b_prime": self.roles[3]},
            "bound": format_probability(self.bound),
            "strategy_count": len(self.values),
            "achiever_count": len(self.achievers),
            "values": {s.label(): format_probability(v) for s, v in self.values.items()},
        }


def max_local_chsh(scenario: Scenario) -> LocalBoundResult:
    """max |S| over all 16 deterministic strategies of a two-setting scenario.

    Roles are taken in declaration order: (a, a') = Alice's settings,
    (b, b') = Bob's.
    """
    if len(scenario.alice_settings) != 2 or len(scenario.bob_settings) != 2:
        raise ScenarioShapeError(
            "CHSH bound needs exactly 2 settings per side, got "
            f"{len(scenario.alice_settings)}x{len(scenario.bob_settings)}"
        )
    a, a2 = scenario.alice_ids()
    b, b2 = scenario.bob_ids()
    values: dict[DeterministicStrategy, Prob] = {}
    for strat in enumerate_strategies(scenario):
        tbl = strategy_behavior(strat, scenario)
        res = correlator(tbl, a, b) + correlator(tbl, a, b2) + correlator(tbl, a2, b) - correlator(tbl, a2, b2)
        values[strat] = res
    bound = max(abs(v) for v in values.values())
    achievers = tuple(s for s, v in values.items() if abs(v) == bound)
    return LocalBoundResult(bound=bound, achievers=achievers, values=values, roles=(a, a2, b, b2))


@dataclass(frozen=True)
class Bell1964Result:
    """|E(1,2) - E(1,3)| <= 1 + E(2,3) over three anti-correlated axes."""

    axes: tuple[Axis, Axis, Axis]
    correlators: dict[str, Prob]
    lhs: Prob
    rhs: Prob
    satisfied: bool
    tolerance: float

    @property
    def violated(self) -> bool:
        return not self.satisfied

    def to_dict(self) -> dict:
        return {
            "axes": [list(axis) for axis in self.axes],
            "correlators": {k: format_probability(v) for k, v in self.correlators.items()},
            "lhs": format_probability(self.lhs),
            "rhs": format_probability(self.rhs),
            "satisfied": self.satisfied,
            "tolerance": self.tolerance,
        }


def bell1964(
    table: BehaviorTable, axes: tuple[Axis, Axis, Axis], tol: float | None = None
) -> Bell1964Result:
    """Evaluate the three-axis inequality; axes are (alice_id, bob_id) pairs.

    Precondition: the behavior is perfectly anti-correlated on each axis
    (same-outcome probability within tolerance of 0 on the diagonal cells).
    Without that the inequality does not apply and chsh is the right test.
    """
    if len(axes) != 3:
        raise ScenarioShapeError(f"three axes required, got {len(axes)}")
    t = _table_tol(table, tol)
    for a_id, b_id in axes:
        dist = table.cell(a_id, b_id)
        if dist.pp > t or dist.mm > t:
            raise AntiCorrelationPreconditionError(
                f"axis ({a_id}, {b_id}) is not perfectly anti-correlated "
                f"(P(+,+)={float(dist.pp)!r}, P(-,-)={float(dist.mm)!r}); "
                "this inequality requires it - use chsh for general behaviors"
            )
    ax1, ax2, ax3 = axes
    e12 = correlator(table, ax1[0], ax2[1])
    e13 = correlator(table, ax1[0], ax3[1])
    e23 = correlator(table, ax2[0], ax3[1])
    lhs = abs(e12 - e13)
    rhs = 1 + e23
    # compare the difference to t: rhs + t would coerce exact rationals to float
    return Bell1964Result(
        axes=(ax1, ax2, ax3),
        correlators={"E(1,2)": e12, "E(1,3)": e13, "E(2,3)": e23},
        lhs=lhs,
        rhs=rhs,
        satisfied=lhs - rhs <= t,
        tolerance=t,
    )


# ---------------------------------------------------------------------------
# Local-polytope membership via exact phase-1 simplex


@dataclass(frozen=True)
class SeparatingFunctional:
    """Affine functional with f(v) <= bound on every deterministic strategy
    but f(behavior) = value > bound."""

    kind: str
    description: str
    coefficients: dict[tuple[str, str, int, int], Prob]
    bound: Prob
    value: Prob

    @property
    def margin(self) -> Prob:
        return self.value - self.bound

    def evaluate(self, table: BehaviorTable) -> Prob:
        total: Prob = Fraction(0)
        for (a_id, b_id, A, B), coeff in self.coefficients.items():
            total = total + coeff * table.cell(a_id, b_id).prob(A, B)
        return total

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "description": self.description,
            "bound": format_probability(self.bound),
            "value": format_probability(self.value),
            "margin": format_probability(self.margin),
            "coefficients": {
                f"{a}|{b}|{'+' if A > 0 else '-'}{'+' if B > 0 else '-'}": format_probability(c)
                for (a, b, A, B), c in self.coefficients.items()
            },
        }


@dataclass(frozen=True)
class MembershipCertificate:
    """Verdict plus evidence: convex weights inside, a functional outside."""

    inside: bool
    weights: dict[DeterministicStrategy, Prob] | None
    functional: SeparatingFunctional | None
    residual: Prob
    tolerance: float

    def to_dict(self) -> dict:
        out: dict = {
            "inside": self.inside,
            "residual": format_probability(self.residual),
            "tolerance": self.tolerance,
        }
        if self.weights is not None:
            out["weights"] = {
                s.label(): format_probability(w) for s, w in self.weights.items()
            }
        if self.functional is not None:
            out["functional"] = self.functional.to_dict()
        return out


def _exact(p: Prob) -> Fraction:
    return p if isinstance(p, Fraction) else Fraction(p)


def _phase1_simplex(
    columns: list[list[Fraction]], rhs: list[Fraction]
) -> tuple[bool, list[Fraction]]:
    """Exact feasibility of {Vw = rhs, w >= 0} with rhs >= 0.

    Returns (True, w) on feasibility or (False, y) with a Farkas vector:
    y . column_j <= 0 for every j but y . rhs > 0.  Bland's rule keeps the
    pivoting finite despite the degeneracy of redundant probability rows.
    """
    m, n = len(rhs), len(columns)
    width = n + m + 1
    tableau = []
    for i in range(m):
        row = [columns[j][i] for j in range(n)]
        row += [Fraction(1) if k == i else Fraction(0) for k in range(m)]
        row.append(rhs[i])
        tableau.append(row)
    basis = [n + i for i in range(m)]
    # reduced costs for phase-1 objective (cost 1 on artificials), priced out
    obj = [Fraction(0)] * width
    for j in range(width):
        col_sum = sum(tableau[i][j] for i in range(m))
        cost = Fraction(1) if n <= j < n + m else Fraction(0)
        obj[j] = cost - col_sum
    obj[-1] = -sum(rhs)

    while True:
        enter = next((j for j in range(n + m) if obj[j] < 0), None)
        if enter is None:
            break
        leave, best_ratio = None, None
        for i in range(m):
            coeff = tableau[i][enter]
            if coeff > 0:
                ratio = tableau[i][-1] / coeff
                if best_ratio is None or ratio < best_ratio or (
                    ratio == best_ratio and basis[i] < basis[leave]
                ):
                    leave, best_ratio = i, ratio
        if leave is None:
            raise BellLabError("phase-1 objective unbounded; this cannot happen")
        pivot = tableau[leave][enter]
        tableau[leave] = [x / pivot for x in tableau[leave]]
        for i in range(m):
            if i != leave and tableau[i][enter] != 0:
                factor = tableau[i][enter]
                tableau[i] = [x - factor * y for x, y in zip(tableau[i], tableau[leave])]
        if obj[enter] != 0:
            factor = obj[enter]
            obj = [x - factor * y for x, y in zip(obj, tableau[leave])]
        basis[leave] = enter

    infeasibility = -obj[-1]
    if infeasibility == 0:
        w = [Fraction(0)] * n
        for i, var in enumerate(basis):
            if var < n:
                w[var] = tableau[i][-1]
        return True, w
    y = [Fraction(1) - obj[n + i] for i in range(m)]
    return False, y


def _chsh_facet_certificate(
    table: BehaviorTable, scenario: Scenario, t: float
) -> SeparatingFunctional | None:
    """Search the eight CHSH sign variants of a 2x2 scenario for one the
    behavior exceeds; bounds are brute-forced per variant."""
    if len(scenario.alice_settings) != 2 or len(scenario.bob_settings) != 2:
        return None
    a, a2 = scenario.alice_ids()
    b, b2 = scenario.bob_ids()
    pairs = [(a, b), (a, b2), (a2, b), (a2, b2)]
    corrs = {pair: correlator(table, *pair) for pair in pairs}
    for signs in itertools.product((+1, -1), repeat=4):
        if signs[0] * signs[1] * signs[2] * signs[3] != -1:
            continue
        value = sum(s * corrs[pair] for s, pair in zip(signs, pairs))
        bound = Fraction(_chsh_sign_bound(signs))
        if value > bound + t:
            terms = " ".join(
                f"{'+' if s > 0 else '-'}E({p[0]},{p[1]})" for s, p in zip(signs, pairs)
            )
            coeffs = {
                (p[0], p[1], A, B): Fraction(s * A * B)
                for s, p in zip(signs, pairs)
                for A, B in JOINT_OUTCOMES
            }
            return SeparatingFunctional(
                kind="chsh",
                description=f"{terms} <= {bound} for every local behavior",
                coefficients=coeffs,
                bound=bound,
                value=value,
            )
    return None


def local_polytope_membership(
    table: BehaviorTable, scenario: Scenario | None = None, tol: float | None = None
) -> MembershipCertificate:
    """Decide membership in the convex hull of deterministic strategies.

    All arithmetic is exact: decimal behaviors are converted digit-for-bit
    to Fractions first, and the phase-1 infeasibility (the `residual`) is
    compared against the tolerance (0 for exact tables, else 1e-9).
    """
    scenario = scenario if scenario is not None else table.scenario
    t = _table_tol(table, tol)
    strategies = enumerate_strategies(scenario)

    row_keys = [
        (a_id, b_id, A, B)
        for a_id, b_id in scenario.pairs()
        for A, B in JOINT_OUTCOMES
    ]
    columns = []
    for strat in strategies:
        col = [strategy_cell_prob(strat, a, b, A, B) for (a, b, A, B) in row_keys]
        col.append(Fraction(1))
        columns.append(col)
    rhs = [_exact(table.cell(a, b).prob(A, B)) for (a, b, A, B) in row_keys]
    rhs.append(Fraction(1))

    feasible, vec = _phase1_simplex(columns, rhs)
    if feasible:
        by_index = {j: w for j, w in enumerate(vec) if w != 0}
        for i in range(len(rhs)):
            recon = sum(w * columns[j][i] for j, w in by_index.items())
            if recon != rhs[i]:
                raise BellLabError("inside certificate failed verification; simplex bug")
        weights = {strategies[j]: w for j, w in by_index.items()}
        return MembershipCertificate(
            inside=True, weights=weights, functional=None, residual=Fraction(0), tolerance=t
        )

    # phase-1 optimum > 0: the minimized artificial mass doubles as an
    # infeasibility residual, and the multipliers y are a Farkas certificate
    residual = sum(y_i * r for y_i, r in zip(vec, rhs))
    if residual <= t:
        return MembershipCertificate(
            inside=True, weights=None, functional=None, residual=residual, tolerance=t
        )

    facet = _chsh_facet_certificate(table, scenario, t)
    if facet is not None:
        return MembershipCertificate(
            inside=False, weights=None, functional=facet, residual=residual, tolerance=t
        )

    # fold the normalization-row multiplier into the bound so the reported
    # functional reads off cell probabilities only
    y_const = vec[-1]
    vertex_values = [sum(y_i * c for y_i, c in zip(vec, col)) for col in columns]
    bound = max(vertex_values) - y_const
    value = residual - y_const
    coeffs = {key: vec[i] for i, key in enumerate(row_keys) if vec[i] != 0}
    functional = SeparatingFunctional(
        kind="affine",
        description="affine separating functional from phase-1 simplex multipliers",
        coefficients=coeffs,
        bound=bound,
        value=value,
    )
    return MembershipCertificate(
        inside=False, weights=None, functional=functional, residual=residual, tolerance=t
    )


@dataclass(frozen=True)
class BellTestResult:
    """Aggregate of the harness tests actually run on one behavior."""

    correlators: dict[tuple[str, str], Prob]
    chsh: CHSHResult | None
    bell1964: Bell1964Result | None
    membership: MembershipCertificate | None

    def to_dict(self) -> dict:
        return {
            "correlators": {f"{k[0]}|{k[1]}": format_probability(v) for k, v in self.correlators.items()},
            "chsh": self.chsh.to_dict() if self.chsh else None,
            "bell1964": self.bell1964.to_dict() if self.bell1964 else None,
            "membership": self.membership.to_dict() if self.membership else None,
        }


def all_correlators(table: BehaviorTable) -> dict[tuple[str, str], Prob]:
    return {pair: correlator(table, *pair) for pair in table.scenario.pairs()}


def resolve_axes(scenario: Scenario, names: list[str]) -> list[Axis]:
    """Resolve axis names to (alice_id, bob_id) pairs.

    Accepts explicit 'aId=bId' pairs; a bare name matches a Bob setting of
    the same id, else a Bob setting with an equal direction vector.
    """
    from .audit import auto_equal_axes

    vector_pairs = dict(auto_equal_axes(scenario))
    out: list[Axis] = []
    for name in names:
        if "=" in name:
            a_id, _, b_id = name.partition("=")
            scenario.alice_setting(a_id)
            scenario.bob_setting(b_id)
            out.append((a_id, b_id))
            continue
        scenario.alice_setting(name)
        if any(s.id == name for s in scenario.bob_settings):
            out.append((name, name))
        elif name in vector_pairs:
            out.append((name, vector_pairs[name]))
        else:
            raise BellLabError(
                f"cannot resolve axis {name!r}: no same-id or same-vector Bob setting"
            )
    return out
