"""Simulation engine: counter-based streams, reproducibility, statistics.

The distributional checks pin exact counts for fixed seeds (frozen from
the implementation once, then held); the statistical checks use generous
sigma windows so they stay deterministic.
"""

from __future__ import annotations

import csv
import math
from collections import Counter

import pytest

from bell_lab.model import BellLabError, behavior
from bell_lab.montecarlo import (
    DRAWS_PER_TRIAL,
    FixedSequencePolicy,
    SLOT_OUTCOME,
    SLOT_STATE,
    THREADS_ENV_VAR,
    UniformSettingPolicy,
    resolve_threads,
    run_experiment,
    stream_uniform,
    summarize,
    trial_uniform,
    write_records_csv,
)
from bell_lab.specio import load_theory


class TestStream:
    def test_pure_function_of_seed_and_position(self):
        assert stream_uniform(1, 0) == stream_uniform(1, 0)
        assert stream_uniform(1, 0) != stream_uniform(2, 0)
        assert stream_uniform(1, 0) != stream_uniform(1, 1)

    def test_values_in_unit_interval(self):
        for pos in range(2000):
            u = stream_uniform(123, pos)
            assert 0.0 <= u < 1.0

    def test_random_access_equals_sequential(self):
        seq = [stream_uniform(9, p) for p in range(100)]
        shuffled_positions = list(range(99, -1, -1))
        assert [stream_uniform(9, p) for p in shuffled_positions] == seq[::-1]

    def test_trial_uniform_layout(self):
        assert trial_uniform(5, 3, SLOT_STATE) == stream_uniform(5, 3 * DRAWS_PER_TRIAL)
        assert trial_uniform(5, 3, SLOT_OUTCOME) == stream_uniform(5, 3 * DRAWS_PER_TRIAL + 3)
        with pytest.raises(ValueError):
            trial_uniform(5, 3, DRAWS_PER_TRIAL)

    def test_uniformity_rough(self):
        n = 20000
        mean = sum(stream_uniform(1234, p) for p in range(n)) / n
        assert abs(mean - 0.5) < 4 * (1 / math.sqrt(12 * n))


class TestRunExperiment:
    def test_records_are_bit_reproducible(self, singlet_chsh):
        first = run_experiment(singlet_chsh, 500, seed=77)
        second = run_experiment(singlet_chsh, 500, seed=77)
        assert first == second

    def test_different_seeds_differ(self, singlet_chsh):
        assert run_experiment(singlet_chsh, 200, seed=1) != run_experiment(
            singlet_chsh, 200, seed=2
        )

    def test_thread_count_never_changes_records(self, singlet_chsh):
        base = run_experiment(singlet_chsh, 1000, seed=9, threads=1)
        for threads in (2, 3, 8):
            assert run_experiment(singlet_chsh, 1000, seed=9, threads=threads) == base

    def test_env_var_controls_threads(self, singlet_chsh, monkeypatch):
        base = run_experiment(singlet_chsh, 400, seed=9, threads=1)
        monkeypatch.setenv(THREADS_ENV_VAR, "4")
        assert run_experiment(singlet_chsh, 400, seed=9) == base
        monkeypatch.setenv(THREADS_ENV_VAR, "banana")
        with pytest.raises(BellLabError):
            run_experiment(singlet_chsh, 400, seed=9)

    def test_resolve_threads_rules(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert resolve_threads(None) == 1
        assert resolve_threads(3) == 3
        assert resolve_threads(0) >= 1
        monkeypatch.setenv(THREADS_ENV_VAR, "2")
        assert resolve_threads(None) == 2
        with pytest.raises(BellLabError):
            resolve_threads(-1)

    def test_trial_indices_are_in_order(self, singlet_chsh):
        records = run_experiment(singlet_chsh, 50, seed=3)
        assert [r.trial for r in records] == list(range(50))

    def test_trial_count_must_be_positive(self, singlet_chsh):
        with pytest.raises(BellLabError):
            run_experiment(singlet_chsh, 0, seed=1)

    def test_invalid_model_rejected(self, fixtures_dir):
        model = load_theory(fixtures_dir / "bad_sum.json")
        from bell_lab.model import InvalidModelError

        with pytest.raises(InvalidModelError):
            run_experiment(model, 10, seed=1)

    def test_fixed_sequence_policy_cycles(self, singlet_chsh):
        policy = FixedSequencePolicy(pairs=(("a1", "b1"), ("a2", "b2")))
        records = run_experiment(singlet_chsh, 6, seed=4, policy=policy)
        assert [(r.a_id, r.b_id) for r in records] == [
            ("a1", "b1"), ("a2", "b2"), ("a1", "b1"), ("a2", "b2"), ("a1", "b1"), ("a2", "b2"),
        ]

    def test_fixed_sequence_rejects_unknown_ids(self, singlet_chsh):
        from bell_lab.model import UnknownIdError

        policy = FixedSequencePolicy(pairs=(("a1", "zz"),))
        with pytest.raises(UnknownIdError):
            run_experiment(singlet_chsh, 5, seed=4, policy=policy)

    def test_empty_fixed_sequence_rejected(self):
        with pytest.raises(BellLabError):
            FixedSequencePolicy(pairs=())

    def test_policy_change_keeps_state_draws(self, singlet_chsh):
        uniform = run_experiment(singlet_chsh, 100, seed=11)
        fixed = run_experiment(
            singlet_chsh, 100, seed=11, policy=FixedSequencePolicy(pairs=(("a1", "b1"),))
        )
        # same slot layout: the hidden state sequence is untouched by policy
        assert [r.state_id for r in uniform] == [r.state_id for r in fixed]

    def test_uniform_policy_spreads_settings(self, singlet_chsh):
        records = run_experiment(singlet_chsh, 4000, seed=12, policy=UniformSettingPolicy())
        pair_counts = Counter((r.a_id, r.b_id) for r in records)
        assert set(pair_counts) == set(singlet_chsh.scenario.pairs())
        for n in pair_counts.values():
            assert abs(n - 1000) < 4 * math.sqrt(1000 * 0.75)

    def test_outcome_frequencies_track_the_kernel(self, fixtures_dir):
        model = load_theory(fixtures_dir / "two_state.json")
        records = run_experiment(model, 20000, seed=13)
        table = behavior(model)
        counts = Counter((r.outcome_a, r.outcome_b) for r in records)
        for (A, B), n in counts.items():
            expected = float(table.cell("n1", "n1").prob(A, B))
            se = math.sqrt(expected * (1 - expected) / 20000)
            assert abs(n / 20000 - expected) < 5 * max(se, 1e-9)


class TestSummarize:
    def test_correlator_estimates_and_errors(self, singlet_chsh):
        records = run_experiment(singlet_chsh, 20000, seed=21)
        stats = summarize(records, singlet_chsh.scenario, seed=21)
        table = behavior(singlet_chsh)
        for pair, est in stats.correlators.items():
            from bell_lab.harness import correlator

            truth = float(correlator(table, *pair))
            assert est.std_error > 0
            assert abs(est.value - truth) < 5 * est.std_error

    def test_chsh_roles_default_to_declaration_order(self, singlet_chsh):
        records = run_experiment(singlet_chsh, 2000, seed=22)
        stats = summarize(records, singlet_chsh.scenario)
        assert stats.chsh_roles == ("a1", "a2", "b1", "b2")
        assert stats.chsh is not None

    def test_explicit_roles_pick_up_the_violation(self, singlet_chsh):
        records = run_experiment(singlet_chsh, 40000, seed=23)
        stats = summarize(records, singlet_chsh.scenario, chsh_roles=("a2", "a1", "b1", "b2"))
        assert abs(stats.chsh.value) > 2.5
        se_manual = math.sqrt(
            sum(stats.correlators[p].std_error ** 2 for p in [
                ("a2", "b1"), ("a2", "b2"), ("a1", "b1"), ("a1", "b2"),
            ])
        )
        assert stats.chsh.std_error == pytest.approx(se_manual)

    def test_counts_total_to_trials(self, singlet_chsh):
        records = run_experiment(singlet_chsh, 3000, seed=24)
        stats = summarize(records, singlet_chsh.scenario)
        assert sum(stats.counts.values()) == 3000
        assert sum(stats.pair_counts.values()) == 3000
        assert stats.trials == 3000

    def test_missing_pairs_drop_chsh(self, singlet_chsh):
        policy = FixedSequencePolicy(pairs=(("a1", "b1"),))
        records = run_experiment(singlet_chsh, 100, seed=25, policy=policy)
        stats = summarize(records, singlet_chsh.scenario)
        assert stats.chsh is None
        assert stats.chsh_roles is None
        assert list(stats.correlators) == [("a1", "b1")]

    def test_signal_deltas_have_errors_and_stay_small(self, singlet_chsh):
        records = run_experiment(singlet_chsh, 30000, seed=26)
        stats = summarize(records, singlet_chsh.scenario)
        assert stats.signal_deltas
        for d in stats.signal_deltas:
            assert d.std_error > 0
            assert d.delta < 4 * d.std_error

    def test_empty_records_rejected(self, singlet_chsh):
        with pytest.raises(BellLabError):
            summarize([], singlet_chsh.scenario)

    def test_summary_never_mentions_hidden_states(self, singlet_chsh):
        records = run_experiment(singlet_chsh, 500, seed=27)
        doc = summarize(records, singlet_chsh.scenario, seed=27).to_dict()
        import json

        assert "psi" not in json.dumps(doc)

    def test_to_dict_shape(self, singlet_chsh):
        records = run_experiment(singlet_chsh, 500, seed=28)
        doc = summarize(records, singlet_chsh.scenario, seed=28).to_dict()
        assert doc["trials"] == 500
        assert doc["seed"] == 28
        assert set(doc) == {
            "trials", "seed", "counts", "pair_counts", "correlators",
            "chsh", "chsh_roles", "signal_deltas",
        }


class TestCsvExport:
    def test_observable_columns_only_by_default(self, singlet_chsh, tmp_path):
        records = run_experiment(singlet_chsh, 20, seed=31)
        out = tmp_path / "records.csv"
        write_records_csv(records, out)
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["trial", "a", "b", "A", "B"]
        assert len(rows) == 21
        assert all(len(row) == 5 for row in rows)

    def test_reveal_hidden_adds_lambda_column(self, singlet_chsh, tmp_path):
        records = run_experiment(singlet_chsh, 5, seed=32)
        out = tmp_path / "records.csv"
        write_records_csv(records, out, reveal_hidden=True)
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["trial", "a", "b", "A", "B", "lambda"]
        assert rows[1][5] == "psi"

    def test_round_trip_values(self, singlet_chsh, tmp_path):
        records = run_experiment(singlet_chsh, 10, seed=33)
        out = tmp_path / "records.csv"
        write_records_csv(records, out)
        rows = list(csv.reader(out.open()))[1:]
        for rec, row in zip(records, rows):
            assert row == [str(rec.trial), rec.a_id, rec.b_id, str(rec.outcome_a), str(rec.outcome_b)]


class TestPhysicsOfTheRun:
    def test_forced_equal_axes_never_agree(self, singlet_equal_axes):
        policy = FixedSequencePolicy(pairs=(("n1", "n1"), ("n2", "n2")))
        records = run_experiment(singlet_equal_axes, 20000, seed=7, policy=policy)
        assert all(r.outcome_a != r.outcome_b for r in records)

    def test_deterministic_model_replays_its_instructions(self, fixtures_dir):
        model = load_theory(fixtures_dir / "eight_pattern.json")
        records = run_experiment(model, 5000, seed=41)
        for rec in records:
            dist = model.kernel.cell(rec.state_id, rec.a_id, rec.b_id)
            assert dist.prob(rec.outcome_a, rec.outcome_b) == 1
