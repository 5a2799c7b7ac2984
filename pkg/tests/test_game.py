import itertools
import math

import numpy as np
import pytest

from conftest import LN_4_3
from fairdm.context import Classifier, Context, joint_outcome_model
from fairdm.errors import GuardError, WitnessInapplicable
from fairdm.game import (
    BehavioralStrategy,
    DecisionGame,
    action_values,
    best_fair_pure_gap,
    best_response_gap,
    build_witness_game,
    expected_utility,
    optimal_fair_strategy,
    rational_fairness_lower_bound,
    rational_fairness_upper_bound,
    unconstrained_best_response,
    witness_closed_form_gap,
)
from fairdm.verify import random_classifier, random_context, random_game

SAFE_B = math.sqrt(0.56 * 0.42)


@pytest.fixture
def model_b(ctx_b, clf_b):
    return joint_outcome_model(ctx_b, clf_b)


@pytest.fixture
def witness_b(model_b):
    return build_witness_game(model_b, "hi", "X", "Y", "class1")


def posterior_context(a, b):
    """Pr[y | X] = a and Pr[y | Y] = b behind a single observable."""
    return Context.from_cells([("X", "y", "v", a), ("X", "n", "v", 1 - a), ("Y", "y", "v", b), ("Y", "n", "v", 1 - b)])


def two_posterior_model(a, b):
    return joint_outcome_model(posterior_context(a, b), Classifier.constant(["v"], {"o": 1.0}))


def simplex_grid(n, step):
    if n == 1:
        return np.ones((1, 1))
    ticks = round(1 / step)
    heads = np.array(list(itertools.product(range(ticks + 1), repeat=n - 1)), dtype=float)
    heads = heads[heads.sum(axis=1) <= ticks]
    return np.hstack([heads, ticks - heads.sum(axis=1, keepdims=True)]) / ticks


def grid_gap(model, game, step=1e-3):
    """Per-outcome brute force over the action simplex."""
    values = action_values(model, game)
    grid = simplex_grid(len(game.actions), step)
    worst = 0.0
    for o in range(len(model.outcomes)):
        best = values[:, o].max(axis=1)
        rows = model.type_support[:, o] & (best > 0)
        if not rows.any():
            continue
        top = float(((grid @ values[rows, o].T) / best[rows]).min(axis=1).max())
        worst = max(worst, -math.log(top) if top > 0 else math.inf)
    return worst


class TestGameTypes:
    def test_utilities_validated(self):
        with pytest.raises(ValueError):
            DecisionGame(("c",), ("a",), [[1.5]])
        with pytest.raises(ValueError):
            DecisionGame(("c",), (), np.zeros((1, 0)))

    def test_dict_round_trip(self, witness_b):
        again = DecisionGame.from_dict(witness_b.to_dict())
        assert again.actions == witness_b.actions
        np.testing.assert_array_equal(again.utility, witness_b.utility)

    def test_strategy_must_be_distribution(self):
        with pytest.raises(ValueError):
            BehavioralStrategy(("X",), ("o",), ("a", "b"), [[[0.5, 0.6]]])

    def test_fairness_flag(self):
        fair = BehavioralStrategy.group_blind(("X", "Y"), ("o",), ("a", "b"), [0.3, 0.7])
        assert fair.is_fair
        unfair = BehavioralStrategy(("X", "Y"), ("o",), ("a", "b"), [[[0.3, 0.7]], [[0.7, 0.3]]])
        assert not unfair.is_fair


class TestEvaluation:
    def test_constant_utility(self, model_b):
        game = DecisionGame(model_b.classes, ("only",), [[1.0], [1.0]])
        s = BehavioralStrategy.group_blind(model_b.groups, model_b.outcomes, game.actions, [1.0])
        assert expected_utility(model_b, game, s, "X", "hi") == pytest.approx(1.0)

    def test_witness_payoffs(self, model_b, witness_b):
        risky = BehavioralStrategy.group_blind(model_b.groups, model_b.outcomes, witness_b.actions, [1.0, 0.0])
        mix = BehavioralStrategy.group_blind(model_b.groups, model_b.outcomes, witness_b.actions, [0.5, 0.5])
        assert expected_utility(model_b, witness_b, risky, "X", "hi") == pytest.approx(0.56)
        assert expected_utility(model_b, witness_b, mix, "X", "hi") == pytest.approx(0.5 * 0.56 + 0.5 * SAFE_B)
        assert expected_utility(model_b, witness_b, mix, "X", "hi") == pytest.approx(0.52249, abs=1e-5)
        assert best_response_gap(model_b, witness_b, mix) == pytest.approx(math.log(2 / (1 + math.sqrt(0.42 / 0.56))))
        assert best_response_gap(model_b, witness_b, risky) == pytest.approx(math.log(SAFE_B / 0.42))
        assert best_response_gap(model_b, witness_b, risky) == pytest.approx(LN_4_3 / 2)

    def test_unsupported_type(self):
        ctx = Context.from_cells([("X", "c", "a", 1), ("Y", "c", "b", 1)])
        model = joint_outcome_model(ctx, Classifier.deterministic({"a": "A", "b": "B"}))
        game = DecisionGame(("c",), ("go",), [[1.0]])
        s = BehavioralStrategy.group_blind(model.groups, model.outcomes, game.actions, [1.0])
        with pytest.raises(ValueError):
            expected_utility(model, game, s, "X", "B")

    def test_zero_payoff_against_positive_best_is_infinite(self, model_b):
        game = DecisionGame(model_b.classes, ("nothing", "something"), [[0.0, 0.5], [0.0, 0.5]])
        s = BehavioralStrategy.group_blind(model_b.groups, model_b.outcomes, game.actions, [1.0, 0.0])
        assert best_response_gap(model_b, game, s) == math.inf

    def test_unconstrained_best_has_no_gap(self, model_b, witness_b):
        assert best_response_gap(model_b, witness_b, unconstrained_best_response(model_b, witness_b)) == 0.0


class TestOptimalFairStrategy:
    def test_witness_b(self, model_b, witness_b):
        analysis = optimal_fair_strategy(model_b, witness_b)
        assert analysis.optimal_gap_of_fair_strategy == pytest.approx(0.06933646419507387, abs=1e-12)
        np.testing.assert_allclose(analysis.fair_strategy.probs[0, 0], [0.5, 0.5], atol=1e-12)
        assert analysis.fair_strategy.is_fair
        assert analysis.optimal_gap_of_fair_strategy == max(analysis.per_outcome_gaps.values())

    def test_single_group(self):
        ctx = Context.from_cells([("X", "c0", "a", 1), ("X", "c1", "b", 1)])
        model = joint_outcome_model(ctx, Classifier.deterministic({"a": "A", "b": "B"}))
        game = DecisionGame(ctx.classes, ("l", "r"), [[1.0, 0.2], [0.1, 0.9]])
        assert optimal_fair_strategy(model, game).optimal_gap_of_fair_strategy == pytest.approx(0.0, abs=1e-12)

    def test_all_zero_game(self, model_b):
        game = DecisionGame(model_b.classes, ("a", "b"), np.zeros((2, 2)))
        analysis = optimal_fair_strategy(model_b, game)
        assert analysis.optimal_gap_of_fair_strategy == 0.0

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_grid_search(self, seed):
        rng = np.random.default_rng([seed, 99])
        ctx = random_context([seed, 1], int(rng.integers(1, 4)), 3, 3, sparse=True)
        clf = random_classifier([seed, 2], ctx, 2)
        model = joint_outcome_model(ctx, clf)
        game = random_game([seed, 3], ctx.classes, int(rng.integers(1, 4)))
        gap = optimal_fair_strategy(model, game).optimal_gap_of_fair_strategy
        assert gap == pytest.approx(grid_gap(model, game), abs=2e-3)
        assert gap <= grid_gap(model, game) + 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_group_relabeling_invariant(self, seed):
        ctx = random_context([seed, 4], 3, 3, 4)
        clf = random_classifier([seed, 5], ctx, 3)
        game = random_game([seed, 6], ctx.classes, 3)
        model = joint_outcome_model(ctx, clf)
        fair = optimal_fair_strategy(model, game).fair_strategy
        perm = [2, 0, 1]
        shuffled = Context(tuple(ctx.groups[i] for i in perm), ctx.classes, ctx.observables, ctx.mass[perm])
        model2 = joint_outcome_model(shuffled, clf)
        fair2 = BehavioralStrategy(model2.groups, fair.outcomes, fair.actions, fair.probs[perm])
        assert best_response_gap(model2, game, fair2) == pytest.approx(best_response_gap(model, game, fair), abs=1e-12)


class TestWitnessGames:
    def test_safe_payoff(self, witness_b):
        assert witness_b.utility[:, 1].tolist() == pytest.approx([SAFE_B, SAFE_B])
        assert witness_b.utility[:, 0].tolist() == [1.0, 0.0]

    def test_extreme_posteriors(self):
        model = two_posterior_model(0.8, 0.2)
        game = build_witness_game(model, "o", "X", "Y", "y")
        assert game.utility[0, 1] == pytest.approx(0.4)
        gap = optimal_fair_strategy(model, game).optimal_gap_of_fair_strategy
        assert gap == pytest.approx(math.log(4 / 3), abs=1e-12)
        assert rational_fairness_lower_bound(posterior_context(0.8, 0.2), model)[0] >= math.log(4 / 3) - 1e-12

    def test_inapplicable(self, model_b):
        with pytest.raises(WitnessInapplicable):
            build_witness_game(model_b, "hi", "X", "X", "class1")
        same = two_posterior_model(0.3, 0.3)
        with pytest.raises(WitnessInapplicable):
            build_witness_game(same, "o", "X", "Y", "y")

    @pytest.mark.parametrize("delta", [LN_4_3, math.log(4), 1.0, 0.01, 2.5])
    def test_closed_form_and_pure(self, delta):
        b = 0.3
        model = two_posterior_model(b * math.exp(delta), b) if b * math.exp(delta) < 1 else two_posterior_model(0.9, 0.9 * math.exp(-delta))
        game = build_witness_game(model, "o", "X", "Y", "y")
        analysis = optimal_fair_strategy(model, game)
        assert analysis.optimal_gap_of_fair_strategy == pytest.approx(witness_closed_form_gap(delta), abs=1e-9)
        np.testing.assert_allclose(analysis.fair_strategy.probs[0, 0], [0.5, 0.5], atol=1e-9)
        pure, _ = best_fair_pure_gap(model, game)
        assert pure == pytest.approx(delta / 2, abs=1e-9)
        assert pure > analysis.optimal_gap_of_fair_strategy


class TestBounds:
    def test_ctx_b(self, ctx_b, clf_b):
        assert rational_fairness_upper_bound(ctx_b, clf_b) == pytest.approx(2 * LN_4_3)
        lower, w = rational_fairness_lower_bound(ctx_b, clf_b)
        assert lower == pytest.approx(witness_closed_form_gap(LN_4_3), abs=1e-12)
        assert w.delta == pytest.approx(LN_4_3)

    def test_no_disparity(self):
        ctx = posterior_context(0.4, 0.4)
        model = two_posterior_model(0.4, 0.4)
        assert rational_fairness_lower_bound(ctx, model) == (0.0, None)
        assert rational_fairness_upper_bound(ctx, model) == 0.0

    def test_support_mismatch_is_infinite(self):
        ctx = Context.from_cells([("X", "c", "a", 1), ("Y", "c", "a", 1), ("Y", "c", "b", 1)])
        clf = Classifier.deterministic({"a": "A", "b": "B"})
        assert rational_fairness_lower_bound(ctx, clf) == (math.inf, None)
        assert rational_fairness_upper_bound(ctx, clf) == math.inf

    def test_guard(self, monkeypatch):
        import fairdm.game as game_mod

        monkeypatch.setattr(game_mod, "MAX_WITNESSES", 3)
        with pytest.raises(GuardError):
            rational_fairness_lower_bound(posterior_context(0.4, 0.5), two_posterior_model(0.4, 0.5))
