"""The decision-maker's Bayesian game induced by a context, a classifier and a utility table.

The decision-maker sees a type ``(group, outcome)``, picks an action and is paid
``u(class, action)``. Strategies are behavioral: one action distribution per
type. A strategy is ``eps``-optimal when, at every type that occurs, no
deviation gains more than a factor ``e**eps`` in conditional expected utility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product
from typing import Mapping, Sequence

import numpy as np

from fairdm.context import Classifier, Context, JointOutcomeModel, joint_outcome_model
from fairdm.errors import GuardError, PairingError, WitnessInapplicable
from fairdm.metrics import predictive_parity_error
from fairdm.simplex import maximin

FAIR_TOL = 1e-12
MAX_WITNESSES = 10**6
RISKY, SAFE = "Risky", "Safe"


@dataclass(frozen=True, eq=False)
class DecisionGame:
    """Finite action set with utilities ``utility[c, x] = u(classes[c], actions[x])`` in [0, 1]."""

    classes: tuple
    actions: tuple
    utility: np.ndarray

    def __post_init__(self):
        classes, actions = tuple(self.classes), tuple(self.actions)
        utility = np.array(self.utility, dtype=float)
        if not actions:
            raise ValueError("a game needs at least one action")
        if len(set(actions)) != len(actions):
            raise ValueError(f"duplicate actions: {actions!r}")
        if utility.shape != (len(classes), len(actions)):
            raise ValueError(f"utility has shape {utility.shape}, expected {(len(classes), len(actions))}")
        if not np.all(np.isfinite(utility)) or np.any(utility < 0) or np.any(utility > 1):
            raise ValueError("utilities must lie in [0, 1]")
        utility.setflags(write=False)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "utility", utility)

    @classmethod
    def from_dict(cls, data: Mapping) -> DecisionGame:
        """Parse ``{"actions": [...], "utility": {class: {action: number}}}``."""
        actions = tuple(data["actions"])
        table = data["utility"]
        classes = tuple(table)
        utility = [[float(table[c][a]) for a in actions] for c in classes]
        return cls(classes, actions, utility)

    def to_dict(self) -> dict:
        return {
            "actions": list(self.actions),
            "utility": {c: dict(zip(self.actions, row.tolist())) for c, row in zip(self.classes, self.utility)},
        }

    def aligned_to(self, classes: tuple) -> np.ndarray:
        missing = [c for c in classes if c not in self.classes]
        if missing:
            raise PairingError(f"game has no utilities for classes {missing!r}")
        return self.utility[[self.classes.index(c) for c in classes]]


@dataclass(frozen=True, eq=False)
class BehavioralStrategy:
    """``probs[g, o, x]``: probability of action ``x`` at type ``(groups[g], outcomes[o])``."""

    groups: tuple
    outcomes: tuple
    actions: tuple
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        shape = (len(self.groups), len(self.outcomes), len(self.actions))
        if probs.shape != shape:
            raise ValueError(f"strategy has shape {probs.shape}, expected {shape}")
        if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=2) - 1.0) > 1e-9):
            raise ValueError("every type needs a probability distribution over actions")
        probs.setflags(write=False)
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "probs", probs)

    @property
    def is_fair(self) -> bool:
        """The action distribution depends on the outcome only, never on the group."""
        return bool(np.all(np.abs(self.probs - self.probs[:1]) <= FAIR_TOL))

    @classmethod
    def group_blind(cls, groups: Sequence, outcomes: Sequence, actions: Sequence, per_outcome) -> BehavioralStrategy:
        """Fair strategy from an ``[o, x]`` table (or one distribution used for every outcome)."""
        table = np.asarray(per_outcome, dtype=float)
        if table.ndim == 1:
            table = np.tile(table, (len(outcomes), 1))
        return cls(groups, outcomes, actions, np.broadcast_to(table, (len(groups), *table.shape)))

    def to_dict(self) -> dict:
        return {
            g: {o: dict(zip(self.actions, self.probs[gi, oi].tolist())) for oi, o in enumerate(self.outcomes)}
            for gi, g in enumerate(self.groups)
        }


@dataclass(frozen=True)
class GameAnalysis:
    optimal_gap_of_fair_strategy: float
    fair_strategy: BehavioralStrategy
    unconstrained_best: BehavioralStrategy
    per_outcome_gaps: dict

    def to_dict(self) -> dict:
        return {
            "optimal_gap_of_fair_strategy": self.optimal_gap_of_fair_strategy,
            "per_outcome_gaps": dict(self.per_outcome_gaps),
            "fair_strategy": self.fair_strategy.to_dict(),
            "unconstrained_best": self.unconstrained_best.to_dict(),
        }


def action_values(model: JointOutcomeModel, game: DecisionGame) -> np.ndarray:
    """``[g, o, x] -> E[u(f, x) | group g, outcome o]`` (zero at unsupported types)."""
    return model.class_given_outcome_table @ game.aligned_to(model.classes)


def _check_strategy(model: JointOutcomeModel, game: DecisionGame, strategy: BehavioralStrategy) -> np.ndarray:
    if strategy.actions != game.actions:
        raise PairingError("strategy and game disagree on the action set")
    try:
        g_idx = [strategy.groups.index(g) for g in model.groups]
        o_idx = [strategy.outcomes.index(o) for o in model.outcomes]
    except ValueError:
        raise PairingError("strategy does not cover every group and outcome of the model") from None
    return strategy.probs[np.ix_(g_idx, o_idx)]


def expected_utility(model: JointOutcomeModel, game: DecisionGame, strategy: BehavioralStrategy, group, outcome) -> float:
    g, o = model.group_index(group), model.outcome_index(outcome)
    if not model.type_support[g, o]:
        raise ValueError(f"type ({group!r}, {outcome!r}) never occurs")
    probs = _check_strategy(model, game, strategy)
    return float(action_values(model, game)[g, o] @ probs[g, o])


def _log_loss(best: np.ndarray, achieved: np.ndarray) -> np.ndarray:
    """``ln(best / achieved)``: 0 where nothing is attainable, ``inf`` where the strategy earns nothing."""
    out = np.zeros(np.shape(best))
    pos = best > 0
    earns = pos & (achieved > 0)
    out[pos & ~earns] = math.inf
    with np.errstate(divide="ignore"):
        out[earns] = np.maximum(np.log(best[earns] / achieved[earns]), 0.0)
    return out


def type_gaps(model: JointOutcomeModel, game: DecisionGame, strategy: BehavioralStrategy) -> np.ndarray:
    """Per-type ``[g, o]`` multiplicative regret of ``strategy``; 0 at types that never occur."""
    probs = _check_strategy(model, game, strategy)
    values = action_values(model, game)
    gaps = _log_loss(values.max(axis=2), np.einsum("gox,gox->go", values, probs))
    gaps[~model.type_support] = 0.0
    return gaps


def best_response_gap(model: JointOutcomeModel, game: DecisionGame, strategy: BehavioralStrategy) -> float:
    """Smallest ``eps`` for which ``strategy`` is ``eps``-optimal."""
    gaps = type_gaps(model, game, strategy)
    return float(gaps.max()) if gaps.size else 0.0


def unconstrained_best_response(model: JointOutcomeModel, game: DecisionGame) -> BehavioralStrategy:
    values = action_values(model, game)
    probs = np.zeros(values.shape)
    np.put_along_axis(probs, values.argmax(axis=2)[..., None], 1.0, axis=2)
    return BehavioralStrategy(model.groups, model.outcomes, game.actions, probs)


def optimal_fair_strategy(model: JointOutcomeModel, game: DecisionGame) -> GameAnalysis:
    """Group-blind strategy with the smallest achievable regret, solved outcome by outcome.

    At each outcome the mixture maximizes the worst ratio, over groups, of its
    expected utility to the best attainable one. Types where no action pays
    anything constrain nothing.
    """
    values = action_values(model, game)
    n_actions = len(game.actions)
    per_outcome = np.zeros((len(model.outcomes), n_actions))
    gaps = {}
    for o, outcome in enumerate(model.outcomes):
        best = values[:, o].max(axis=1)
        rows = np.flatnonzero(model.type_support[:, o] & (best > 0))
        if rows.size == 0:
            per_outcome[o, 0] = 1.0
            gaps[outcome] = 0.0
            continue
        p, _ = maximin(values[rows, o] / best[rows, None])
        per_outcome[o] = p
        gaps[outcome] = float(_log_loss(best[rows], values[rows, o] @ p).max())
    fair = BehavioralStrategy.group_blind(model.groups, model.outcomes, game.actions, per_outcome)
    return GameAnalysis(
        optimal_gap_of_fair_strategy=max(gaps.values(), default=0.0),
        fair_strategy=fair,
        unconstrained_best=unconstrained_best_response(model, game),
        per_outcome_gaps=gaps,
    )


def best_fair_pure_gap(model: JointOutcomeModel, game: DecisionGame) -> tuple[float, dict]:
    """Smallest regret of a group-blind *pure* strategy, with the action chosen at each outcome."""
    values = action_values(model, game)
    choice, worst = {}, 0.0
    for o, outcome in enumerate(model.outcomes):
        best = values[:, o].max(axis=1)
        support = model.type_support[:, o]
        losses = [
            float(_log_loss(best[support], values[support, o, x]).max(initial=0.0))
            for x in range(len(game.actions))
        ]
        x = int(np.argmin(losses))
        choice[outcome] = game.actions[x]
        worst = max(worst, losses[x])
    return worst, choice


def build_witness_game(model: JointOutcomeModel, outcome, group, other_group, y_star) -> DecisionGame:
    """Two-action game exploiting a predictive-parity gap at ``outcome`` between two groups.

    Risky pays 1 exactly when the class is ``y_star``; Safe pays the geometric
    mean of the two groups' posteriors of ``y_star``.
    """
    o = model.outcome_index(outcome)
    g, h = model.group_index(group), model.group_index(other_group)
    c = model.class_index(y_star)
    if g == h:
        raise WitnessInapplicable("witness needs two distinct groups")
    if not (model.type_support[g, o] and model.type_support[h, o]):
        raise WitnessInapplicable("both types must occur")
    a = model.class_given_outcome_table[g, o, c]
    b = model.class_given_outcome_table[h, o, c]
    if a <= 0 or b <= 0 or a == b:
        raise WitnessInapplicable(f"posteriors ({a}, {b}) leave no disparity to exploit")
    safe = math.sqrt(a * b)
    utility = np.zeros((len(model.classes), 2))
    utility[c, 0] = 1.0
    utility[:, 1] = safe
    return DecisionGame(model.classes, (RISKY, SAFE), utility)


def witness_closed_form_gap(delta: float) -> float:
    """Regret of the best fair strategy in a witness game with posterior log-ratio ``delta``."""
    return math.log(2.0 / (1.0 + math.exp(-delta / 2.0)))


@dataclass(frozen=True)
class LowerBoundWitness:
    outcome: str
    group: str
    other_group: str
    y_star: str
    delta: float
    game: DecisionGame


def _model_of(ctx: Context, clf: Classifier | JointOutcomeModel) -> JointOutcomeModel:
    return clf if isinstance(clf, JointOutcomeModel) else joint_outcome_model(ctx, clf)


def rational_fairness_upper_bound(ctx: Context, clf: Classifier | JointOutcomeModel) -> float:
    """Every game admits a fair strategy at least this close to optimal (twice the predictive-parity error)."""
    return 2.0 * predictive_parity_error(ctx, _model_of(ctx, clf))[0]


def rational_fairness_lower_bound(ctx: Context, clf: Classifier | JointOutcomeModel) -> tuple[float, LowerBoundWitness | None]:
    """Certified lower bound on the rational-fairness error, from Risky/Safe witness games.

    Returns ``inf`` (without a witness game) when some outcome occurs for one
    group but not another, which already rules out finite fair treatment.
    """
    model = _model_of(ctx, clf)
    n_witnesses = len(model.outcomes) * len(model.groups) ** 2 * len(model.classes)
    if n_witnesses > MAX_WITNESSES:
        raise GuardError(f"{n_witnesses} witness games exceed the limit of {MAX_WITNESSES}")
    support = model.type_support
    if np.any(support.any(axis=0) & ~support.all(axis=0)):
        return math.inf, None

    post = model.class_given_outcome_table
    best, witness = 0.0, None
    for o, (g, h), c in product(range(len(model.outcomes)), combinations(range(len(model.groups)), 2), range(len(model.classes))):
        a, b = post[g, o, c], post[h, o, c]
        if a <= 0 or b <= 0 or a == b:
            continue
        args = (model.outcomes[o], model.groups[g], model.groups[h], model.classes[c])
        game = build_witness_game(model, *args)
        gap = optimal_fair_strategy(model, game).optimal_gap_of_fair_strategy
        if witness is None or gap > best:
            best = gap
            witness = LowerBoundWitness(*args, delta=abs(math.log(a / b)), game=game)
    return best, witness
