"""EPRB run simulation with counter-based, splittable random streams.

Every random draw is a pure function of (seed, trial, slot): the stream is
the SplitMix64 sequence evaluated at position trial*4 + slot, so trial i
can be generated without generating trials 0..i-1.  That makes runs
bit-reproducible, order-independent, and safe to chunk across threads; the
thread count (BELL_LAB_THREADS, 0 = auto) can never change the records.

Slots: 0 = hidden state, 1 = Alice setting, 2 = Bob setting, 3 = outcome
pair.  Fixed-sequence setting policies leave slots 1 and 2 unused but
reserved, so switching policy never shifts the other draws.

Summaries deliberately see only observables: hidden-state ids stay out of
the statistics and out of CSV exports unless explicitly revealed.
"""

from __future__ import annotations

import csv
import math
import os
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .model import (
    BellLabError,
    JOINT_OUTCOMES,
    Scenario,
    TheoryModel,
    require_valid,
)

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

DRAWS_PER_TRIAL = 4
SLOT_STATE, SLOT_ALICE, SLOT_BOB, SLOT_OUTCOME = range(DRAWS_PER_TRIAL)

THREADS_ENV_VAR = "BELL_LAB_THREADS"


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijective avalanche on 64-bit words."""
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def stream_uniform(seed: int, position: int) -> float:
    """The SplitMix64 output at `position`, mapped into [0, 1)."""
    state = (seed + (position + 1) * _GAMMA) & _MASK64
    return _mix64(state) / 2.0**64


def trial_uniform(seed: int, trial: int, slot: int) -> float:
    if not 0 <= slot < DRAWS_PER_TRIAL:
        raise ValueError(f"slot must be in [0, {DRAWS_PER_TRIAL}), got {slot}")
    return stream_uniform(seed, trial * DRAWS_PER_TRIAL + slot)


@dataclass(frozen=True)
class UniformSettingPolicy:
    """Each wing picks independently and uniformly among its settings."""


@dataclass(frozen=True)
class FixedSequencePolicy:
    """Deterministic setting pairs, cycled over trials."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.pairs:
            raise BellLabError("fixed-sequence policy needs at least one pair")


SettingPolicy = UniformSettingPolicy | FixedSequencePolicy


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    state_id: str
    a_id: str
    b_id: str
    outcome_a: int
    outcome_b: int


def resolve_threads(threads: int | None = None) -> int:
    """Thread count from the argument, else the environment, else 1; 0 = auto."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV_VAR, "").strip()
        if not raw:
            return 1
        try:
            threads = int(raw)
        except ValueError as exc:
            raise BellLabError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from exc
    if threads < 0:
        raise BellLabError(f"thread count must be >= 0, got {threads}")
    if threads == 0:
        return os.cpu_count() or 1
    return threads


def _cumulative(values: list[float]) -> list[float]:
    total = 0.0
    out = []
    for v in values:
        total += max(0.0, v)
        out.append(total)
    return out


def _pick(cum: list[float], u: float) -> int:
    idx = bisect_right(cum, u)
    return min(idx, len(cum) - 1)


class _Sampler:
    """Precomputed cumulative tables for one model; drives the trial loop."""

    def __init__(self, model: TheoryModel, policy: SettingPolicy):
        self.scenario = model.scenario
        self.state_ids = model.ensemble.state_ids()
        self.state_cum = _cumulative([float(e.weight) for e in model.ensemble.entries])
        self.alice_ids = model.scenario.alice_ids()
        self.bob_ids = model.scenario.bob_ids()
        self.outcome_cum = {
            key: _cumulative([float(p) for p in dist.values()])
            for key, dist in model.kernel.cells.items()
        }
        self.policy = policy
        if isinstance(policy, FixedSequencePolicy):
            for a_id, b_id in policy.pairs:
                model.scenario.alice_setting(a_id)
                model.scenario.bob_setting(b_id)

    def trial(self, seed: int, index: int) -> TrialRecord:
        state = self.state_ids[_pick(self.state_cum, trial_uniform(seed, index, SLOT_STATE))]
        if isinstance(self.policy, FixedSequencePolicy):
            a_id, b_id = self.policy.pairs[index % len(self.policy.pairs)]
        else:
            ua = trial_uniform(seed, index, SLOT_ALICE)
            ub = trial_uniform(seed, index, SLOT_BOB)
            a_id = self.alice_ids[min(int(ua * len(self.alice_ids)), len(self.alice_ids) - 1)]
            b_id = self.bob_ids[min(int(ub * len(self.bob_ids)), len(self.bob_ids) - 1)]
        cum = self.outcome_cum[(state, a_id, b_id)]
        outcome_a, outcome_b = JOINT_OUTCOMES[_pick(cum, trial_uniform(seed, index, SLOT_OUTCOME))]
        return TrialRecord(
            trial=index, state_id=state, a_id=a_id, b_id=b_id,
            outcome_a=outcome_a, outcome_b=outcome_b,
        )


def run_experiment(
    model: TheoryModel,
    trials: int,
    seed: int,
    policy: SettingPolicy | None = None,
    threads: int | None = None,
) -> list[TrialRecord]:
    """Simulate `trials` EPRB rounds; bit-identical for identical inputs.

    The thread count only chunks the work; records are always returned in
    trial order with the exact same content.
    """
    if trials <= 0:
        raise BellLabError(f"trial count must be positive, got {trials}")
    require_valid(model)
    seed = seed & _MASK64
    sampler = _Sampler(model, policy if policy is not None else UniformSettingPolicy())
    n_threads = resolve_threads(threads)
    if n_threads <= 1 or trials < 2 * n_threads:
        return [sampler.trial(seed, i) for i in range(trials)]
    chunk = -(-trials // n_threads)
    ranges = [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        chunks = list(
            pool.map(lambda r: [sampler.trial(seed, i) for i in range(r[0], r[1])], ranges)
        )
    return [rec for part in chunks for rec in part]


@dataclass(frozen=True)
class Estimate:
    value: float
    std_error: float

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error}


@dataclass(frozen=True)
class NoSignalingDelta:
    side: str
    outcome: int
    own_setting: str
    far_pair: tuple[str, str]
    delta: float
    std_error: float

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "outcome": self.outcome,
            "own_setting": self.own_setting,
            "far_pair": list(self.far_pair),
            "delta": self.delta,
            "std_error": self.std_error,
        }


@dataclass(frozen=True)
class ExperimentStats:
    """Observable summary of a simulated run.

    Correlator standard errors use the plug-in binomial form
    sqrt((1 - E^2)/n); the CHSH error adds the four in quadrature.  Setting
    pairs never observed are simply absent.
    """

    trials: int
    seed: int | None
    counts: dict[tuple[str, str, int, int], int]
    pair_counts: dict[tuple[str, str], int]
    correlators: dict[tuple[str, str], Estimate]
    chsh: Estimate | None
    chsh_roles: tuple[str, str, str, str] | None
    signal_deltas: tuple[NoSignalingDelta, ...]

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "counts": {
                f"{a}|{b}|{'+' if A > 0 else '-'}{'+' if B > 0 else '-'}": n
                for (a, b, A, B), n in self.counts.items()
            },
            "pair_counts": {f"{a}|{b}": n for (a, b), n in self.pair_counts.items()},
            "correlators": {f"{a}|{b}": e.to_dict() for (a, b), e in self.correlators.items()},
            "chsh": self.chsh.to_dict() if self.chsh else None,
            "chsh_roles": list(self.chsh_roles) if self.chsh_roles else None,
            "signal_deltas": [d.to_dict() for d in self.signal_deltas],
        }


def summarize(
    records: list[TrialRecord],
    scenario: Scenario,
    chsh_roles: tuple[str, str, str, str] | None = None,
    seed: int | None = None,
) -> ExperimentStats:
    """Aggregate records into estimates; sees outcomes and settings only.

    `chsh_roles` defaults to declaration order (a1, a2, b1, b2) when the
    scenario is two-by-two and all four pairs were observed.
    """
    if not records:
        raise BellLabError("cannot summarize an empty record list")
    counts: dict[tuple[str, str, int, int], int] = {}
    pair_counts: dict[tuple[str, str], int] = {}
    for rec in records:
        key = (rec.a_id, rec.b_id, rec.outcome_a, rec.outcome_b)
        counts[key] = counts.get(key, 0) + 1
        pair_counts[(rec.a_id, rec.b_id)] = pair_counts.get((rec.a_id, rec.b_id), 0) + 1

    correlators: dict[tuple[str, str], Estimate] = {}
    for pair in scenario.pairs():
        n = pair_counts.get(pair, 0)
        if n == 0:
            continue
        a, b = pair
        e_sum = sum(A * B * counts.get((a, b, A, B), 0) for A, B in JOINT_OUTCOMES)
        est = e_sum / n
        se = math.sqrt(max(0.0, 1.0 - est * est) / n)
        correlators[pair] = Estimate(value=est, std_error=se)

    if chsh_roles is None and len(scenario.alice_settings) == 2 and len(scenario.bob_settings) == 2:
        a1, a2 = scenario.alice_ids()
        b1, b2 = scenario.bob_ids()
        chsh_roles = (a1, a2, b1, b2)
    chsh_est: Estimate | None = None
    if chsh_roles is not None:
        a, a2, b, b2 = chsh_roles
        needed = [(a, b), (a, b2), (a2, b), (a2, b2)]
        if all(pair in correlators for pair in needed):
            value = (
                correlators[(a, b)].value
                + correlators[(a, b2)].value
                + correlators[(a2, b)].value
                - correlators[(a2, b2)].value
            )
            se = math.sqrt(sum(correlators[p].std_error ** 2 for p in needed))
            chsh_est = Estimate(value=value, std_error=se)
        else:
            chsh_roles = None

    def marginal(side: str, own: str, far: str, outcome: int) -> tuple[float, float] | None:
        pair = (own, far) if side == "alice" else (far, own)
        n = pair_counts.get(pair, 0)
        if n == 0:
            return None
        if side == "alice":
            hits = sum(counts.get((own, far, outcome, B), 0) for B in (+1, -1))
        else:
            hits = sum(counts.get((far, own, A, outcome), 0) for A in (+1, -1))
        p = hits / n
        return p, math.sqrt(p * (1.0 - p) / n)

    deltas: list[NoSignalingDelta] = []
    for side, own_ids, far_ids in (
        ("alice", scenario.alice_ids(), scenario.bob_ids()),
        ("bob", scenario.bob_ids(), scenario.alice_ids()),
    ):
        for own in own_ids:
            for outcome in (+1, -1):
                for i in range(len(far_ids)):
                    for j in range(i + 1, len(far_ids)):
                        first = marginal(side, own, far_ids[i], outcome)
                        second = marginal(side, own, far_ids[j], outcome)
                        if first is None or second is None:
                            continue
                        (p1, se1), (p2, se2) = first, second
                        deltas.append(
                            NoSignalingDelta(
                                side=side,
                                outcome=outcome,
                                own_setting=own,
                                far_pair=(far_ids[i], far_ids[j]),
                                delta=abs(p1 - p2),
                                std_error=math.sqrt(se1 * se1 + se2 * se2),
                            )
                        )

    return ExperimentStats(
        trials=len(records),
        seed=seed,
        counts=counts,
        pair_counts=pair_counts,
        correlators=correlators,
        chsh=chsh_est,
        chsh_roles=chsh_roles,
        signal_deltas=tuple(deltas),
    )


def write_records_csv(records: list[TrialRecord], path, reveal_hidden: bool = False) -> None:
    """Export observable columns `trial,a,b,A,B`; the hidden-state column
    appears only when explicitly revealed."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["trial", "a", "b", "A", "B"]
        if reveal_hidden:
            header.append("lambda")
        writer.writerow(header)
        for rec in records:
            row = [rec.trial, rec.a_id, rec.b_id, rec.outcome_a, rec.outcome_b]
            if reveal_hidden:
                row.append(rec.state_id)
            writer.writerow(row)
