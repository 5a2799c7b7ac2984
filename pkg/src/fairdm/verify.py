"""Randomized harness that checks the relationships between the fairness notions on small random instances.

Every trial draws a context, a classifier, a few utility games and a
post-processing channel from a seed derived from ``(config.seed, trial)``,
then runs each registered property on them. A failed property keeps its first
counterexample in serialized form so it can be reloaded and rechecked.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from fairdm import io as fio
from fairdm.context import (
    Classifier,
    Context,
    JointOutcomeModel,
    compose_postprocess,
    joint_outcome_model,
    mult_distance,
)
from fairdm.game import (
    DecisionGame,
    best_fair_pure_gap,
    best_response_gap,
    build_witness_game,
    optimal_fair_strategy,
    rational_fairness_lower_bound,
    witness_closed_form_gap,
)
from fairdm.metrics import (
    equal_base_rates_error,
    fair_treatment_error,
    predictive_parity_error,
    reevaluate,
)
from fairdm.triviality import (
    ambiguity_distance,
    ambiguity_graph,
    subgroup_perfect_prediction,
    synthesize_trivial_classifier,
    triviality_error,
)

PASS, FAIL, SKIP = "pass", "fail", "skip"
# trials at or above this eps are counted separately; the rf-to-pp conversion only covers smaller eps
LARGE_EPSILON = 1.5


@dataclass(frozen=True)
class TrialConfig:
    seed: int = 42
    trials: int = 500
    max_groups: int = 3
    max_classes: int = 4
    max_observables: int = 5
    max_outcomes: int = 4
    max_actions: int = 4
    games_per_trial: int = 3
    tolerance: float = 1e-9

    def __post_init__(self):
        counts = (self.trials, self.max_groups, self.max_classes, self.max_observables, self.max_outcomes,
                  self.max_actions, self.games_per_trial)
        if min(counts) < 1:
            raise ValueError("all counts must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class CheckResult:
    status: str
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL


def _pass_or_fail(violations: list[str], applicable: int) -> CheckResult:
    if violations:
        return CheckResult(FAIL, "; ".join(violations[:3]))
    if applicable == 0:
        return CheckResult(SKIP, "no applicable cases")
    return CheckResult(PASS, f"{applicable} cases")


# ---------------------------------------------------------------------------
# random instances


def random_context(seed, n_groups: int, n_classes: int, n_observables: int,
                   sparse: bool = False, blocks: int | None = None) -> Context:
    """Context with exponential masses, optionally sparsified and/or split into observable blocks.

    With ``blocks``, classes and observables are assigned to blocks and mass only
    sits where they agree, which produces separable structure. Classes or groups
    left without mass get one cell re-filled.
    """
    rng = np.random.default_rng(seed)
    mass = rng.exponential(size=(n_groups, n_classes, n_observables))
    allowed = np.ones((n_classes, n_observables), dtype=bool)
    if blocks is not None:
        blocks = max(1, min(blocks, n_observables))
        obs_block = np.concatenate([np.arange(blocks), rng.integers(blocks, size=n_observables - blocks)])
        cls_block = rng.integers(blocks, size=n_classes)
        allowed = cls_block[:, None] == obs_block[None, :]
        mass *= allowed[None]
    if sparse:
        mass *= rng.random(mass.shape) >= 1 / 3
    for c in range(n_classes):
        if mass[:, c].sum() == 0:
            v = rng.choice(np.flatnonzero(allowed[c]))
            mass[rng.integers(n_groups), c, v] = rng.exponential()
    for g in range(n_groups):
        if mass[g].sum() == 0:
            c = rng.integers(n_classes)
            v = rng.choice(np.flatnonzero(allowed[c]))
            mass[g, c, v] = rng.exponential()
    return Context(
        tuple(f"g{i}" for i in range(n_groups)),
        tuple(f"c{i}" for i in range(n_classes)),
        tuple(f"v{i}" for i in range(n_observables)),
        mass,
    )


def _stochastic_rows(rng, rows: int, cols: int, sparse: bool) -> np.ndarray:
    m = rng.exponential(size=(rows, cols))
    if sparse:
        m *= rng.random(m.shape) >= 1 / 3
        for r in np.flatnonzero(m.sum(axis=1) == 0):
            m[r, rng.integers(cols)] = rng.exponential()
    return m / m.sum(axis=1, keepdims=True)


def random_classifier(seed, ctx: Context, n_outcomes: int, sparse: bool = False) -> Classifier:
    """Random channel whose outcome set is pruned to the outcomes the context actually reaches."""
    rng = np.random.default_rng(seed)
    channel = _stochastic_rows(rng, len(ctx.observables), n_outcomes, sparse)
    reached = ctx.mass.sum(axis=(0, 1)) @ channel > 0
    channel = channel[:, reached]
    sums = channel.sum(axis=1, keepdims=True)
    channel = np.where(sums > 0, channel / np.where(sums > 0, sums, 1.0), 1.0 / channel.shape[1])
    outcomes = tuple(f"o{i}" for i in np.flatnonzero(reached))
    return Classifier(ctx.observables, outcomes, channel)


def random_game(seed, classes: tuple, n_actions: int) -> DecisionGame:
    rng = np.random.default_rng(seed)
    return DecisionGame(classes, tuple(f"a{i}" for i in range(n_actions)), rng.random((len(classes), n_actions)))


def random_postprocessor(seed, clf: Classifier, n_outcomes: int) -> Classifier:
    rng = np.random.default_rng(seed)
    channel = _stochastic_rows(rng, len(clf.outcomes), n_outcomes, sparse=bool(rng.random() < 0.5))
    return Classifier(clf.outcomes, tuple(f"p{i}" for i in range(n_outcomes)), channel)


# ---------------------------------------------------------------------------
# individual checks


def _eps(ctx: Context, model: JointOutcomeModel) -> float:
    return max(fair_treatment_error(ctx, model)[0], predictive_parity_error(ctx, model)[0])


def check_identity(ctx: Context, clf: Classifier, tol: float) -> CheckResult:
    """Base-rate identity linking outcome-given-class and class-given-outcome ratios within each group."""
    model = joint_outcome_model(ctx, clf)
    ogc, cgo, br = model.outcome_given_class_table, model.class_given_outcome_table, model.base_rate_table
    violations, applicable = [], 0
    for x in range(len(model.groups)):
        for o in range(len(model.outcomes)):
            for i in range(len(model.classes)):
                for j in range(len(model.classes)):
                    if i == j or model.mass[x, i, o] <= 0 or model.mass[x, j, o] <= 0:
                        continue
                    applicable += 1
                    lhs = ogc[x, i, o] / ogc[x, j, o]
                    rhs = br[x, j] / br[x, i] * (cgo[x, o, i] / cgo[x, o, j])
                    gap = mult_distance(lhs, rhs)
                    if gap > tol:
                        violations.append(f"{model.groups[x]},{model.classes[i]},{model.classes[j]},{model.outcomes[o]}: {gap:.3g}")
    return _pass_or_fail(violations, applicable)


def check_ratio_bound(ctx: Context, clf: Classifier, tol: float) -> CheckResult:
    """Ambiguous classes have base-rate ratios across groups within 4*eps, eps = max(ft, pp)."""
    model = joint_outcome_model(ctx, clf)
    eps = _eps(ctx, model)
    if math.isinf(eps):
        return CheckResult(SKIP, "infinite fairness error")
    br = ctx.base_rate_table
    graph = ambiguity_graph(model)
    violations, applicable = [], 0
    for ci, cj in sorted(graph.edges, key=lambda e: (ctx.class_index(e[0]), ctx.class_index(e[1]))):
        i, j = ctx.class_index(ci), ctx.class_index(cj)
        for x, y in combinations(range(len(ctx.groups)), 2):
            applicable += 1
            gap = mult_distance(br[x, i] / br[y, i], br[x, j] / br[y, j])
            if gap > 4 * eps + tol:
                violations.append(f"{ci},{cj} groups {ctx.groups[x]},{ctx.groups[y]}: {gap:.6g} > 4*{eps:.6g}")
    return _pass_or_fail(violations, applicable)


def check_necessity(ctx: Context, clf: Classifier, tol: float) -> CheckResult:
    """A classifier with fair treatment and predictive parity both within eps forces 4(k-1)eps-triviality."""
    model = joint_outcome_model(ctx, clf)
    eps = _eps(ctx, model)
    if math.isinf(eps):
        return CheckResult(SKIP, "infinite fairness error")
    triv = triviality_error(ctx).epsilon
    bound = 4 * (ctx.k - 1) * eps
    if triv > bound + tol:
        return CheckResult(FAIL, f"triviality {triv!r} > 4(k-1)eps = {bound!r}")
    return CheckResult(PASS, f"triviality {triv:.6g} <= {bound:.6g}")


def check_sufficiency(ctx: Context, tol: float, games: list[DecisionGame] = ()) -> CheckResult:
    """The block-index classifier of an eps-trivial context is perfectly fair-treating,
    eps-predictive-parity, and every game has a fair strategy within 2*eps."""
    cert = triviality_error(ctx)
    if math.isinf(cert.epsilon):
        return CheckResult(SKIP, "context is not trivial for any finite eps")
    clf = synthesize_trivial_classifier(ctx, cert.partition)
    model = joint_outcome_model(ctx, clf)
    ft = fair_treatment_error(ctx, model)[0]
    pp = predictive_parity_error(ctx, model)[0]
    problems = []
    if ft != 0.0:
        problems.append(f"fair treatment error {ft!r} != 0")
    if pp > cert.epsilon + tol:
        problems.append(f"predictive parity {pp!r} > {cert.epsilon!r}")
    for n, game in enumerate(games):
        gap = optimal_fair_strategy(model, game).optimal_gap_of_fair_strategy
        if gap > 2 * cert.epsilon + tol:
            problems.append(f"game {n}: fair gap {gap!r} > 2*{cert.epsilon!r}")
    if problems:
        return CheckResult(FAIL, "; ".join(problems))
    return CheckResult(PASS, f"eps={cert.epsilon:.6g}")


def check_characterization(ctx: Context, clf: Classifier, tol: float, games: list[DecisionGame] = ()) -> dict:
    """Both directions of the characterization: ``{"necessity": ..., "sufficiency": ...}``."""
    return {"necessity": check_necessity(ctx, clf, tol), "sufficiency": check_sufficiency(ctx, tol, games)}


def check_postprocessing(ctx: Context, clf: Classifier, channel: Classifier | np.ndarray, tol: float) -> CheckResult:
    """Post-processing the classifier's output never increases its fair-treatment error."""
    before = fair_treatment_error(ctx, clf)[0]
    after = fair_treatment_error(ctx, compose_postprocess(clf, channel))[0]
    if after > before + tol:
        return CheckResult(FAIL, f"{after!r} > {before!r}")
    return CheckResult(PASS, f"{after:.6g} <= {before:.6g}")


def check_fair_gap_bound(ctx: Context, clf: Classifier, tol: float, games: list[DecisionGame]) -> CheckResult:
    """eps-predictive parity gives every game a fair strategy within 2*eps of optimal."""
    model = joint_outcome_model(ctx, clf)
    pp = predictive_parity_error(ctx, model)[0]
    problems = []
    for n, game in enumerate(games):
        analysis = optimal_fair_strategy(model, game)
        gap = analysis.optimal_gap_of_fair_strategy
        if gap > 2 * pp + tol:
            problems.append(f"game {n}: gap {gap!r} > 2*pp {2 * pp!r}")
        recomputed = best_response_gap(model, game, analysis.fair_strategy)
        if not analysis.fair_strategy.is_fair or abs(recomputed - gap) > 1e-9:
            problems.append(f"game {n}: fair strategy inconsistent ({recomputed!r} vs {gap!r})")
    return _pass_or_fail(problems, len(games))


def check_witness_lower_bound(ctx: Context, clf: Classifier, tol: float) -> CheckResult:
    """A predictive-parity gap delta forces a fair-strategy regret of at least ln(2/(1+e^(-delta/2)))."""
    model = joint_outcome_model(ctx, clf)
    delta = predictive_parity_error(ctx, model)[0]
    if delta == 0 or math.isinf(delta):
        return CheckResult(SKIP, f"predictive parity error {delta!r}")
    lower, _ = rational_fairness_lower_bound(ctx, model)
    floor = witness_closed_form_gap(delta)
    if lower < floor - tol:
        return CheckResult(FAIL, f"lower bound {lower!r} < {floor!r}")
    return CheckResult(PASS, f"{lower:.6g} >= {floor:.6g}")


def _two_type_slice(model: JointOutcomeModel, outcome, group, other_group) -> JointOutcomeModel:
    g, h, o = model.group_index(group), model.group_index(other_group), model.outcome_index(outcome)
    return JointOutcomeModel((group, other_group), model.classes, (outcome,), model.mass[[g, h]][:, :, [o]])


def check_mixed_vs_pure(ctx: Context, clf: Classifier, tol: float) -> CheckResult:
    """In the witness game at the predictive-parity witness, the best fair pure strategy loses delta/2,
    strictly more than the best fair mixed strategy."""
    model = joint_outcome_model(ctx, clf)
    delta, w = predictive_parity_error(ctx, model)
    if w is None or delta == 0 or math.isinf(delta):
        return CheckResult(SKIP, f"predictive parity error {delta!r}")
    sliced = _two_type_slice(model, w.first, w.group_x, w.group_y)
    game = build_witness_game(sliced, w.first, w.group_x, w.group_y, w.second)
    mixed = optimal_fair_strategy(sliced, game).optimal_gap_of_fair_strategy
    pure, _ = best_fair_pure_gap(sliced, game)
    problems = []
    if abs(pure - delta / 2) > tol:
        problems.append(f"pure gap {pure!r} != delta/2 {delta / 2!r}")
    if abs(mixed - witness_closed_form_gap(delta)) > tol:
        problems.append(f"mixed gap {mixed!r} != closed form {witness_closed_form_gap(delta)!r}")
    if not pure > mixed:
        problems.append(f"pure gap {pure!r} not above mixed gap {mixed!r}")
    return _pass_or_fail(problems, 1)


def check_short_chains(ctx: Context, clf: Classifier, tol: float) -> CheckResult:
    """Without subgroup perfect prediction every pair of classes is joined by a chain of length <= k-1."""
    model = joint_outcome_model(ctx, clf)
    if ctx.k < 2:
        return CheckResult(SKIP, "single class")
    if subgroup_perfect_prediction(model) is not None:
        return CheckResult(SKIP, "outcome ambiguity graph is disconnected")
    graph = ambiguity_graph(model)
    problems = [
        f"{i},{j}: {d}" for i, j in combinations(ctx.classes, 2)
        if (d := ambiguity_distance(graph, i, j)) > ctx.k - 1
    ]
    return _pass_or_fail(problems, max(1, ctx.k * (ctx.k - 1) // 2))


def check_base_rate_dichotomy(ctx: Context, clf: Classifier, tol: float) -> CheckResult:
    """Without subgroup perfect prediction the base rates are 4(k-1)eps-close, eps = max(ft, pp)."""
    model = joint_outcome_model(ctx, clf)
    if ctx.k >= 2 and subgroup_perfect_prediction(model) is not None:
        return CheckResult(SKIP, "classifier separates a class subset")
    eps = _eps(ctx, model)
    if math.isinf(eps):
        return CheckResult(SKIP, "infinite fairness error")
    ebr = equal_base_rates_error(ctx)[0]
    bound = 4 * (ctx.k - 1) * eps
    if ebr > bound + tol:
        return CheckResult(FAIL, f"base-rate error {ebr!r} > {bound!r}")
    return CheckResult(PASS, f"{ebr:.6g} <= {bound:.6g}")


def check_edge_refinement(ctx: Context, clf: Classifier, tol: float) -> CheckResult:
    """Classes sharing an observable also share an outcome."""
    obs_edges = ambiguity_graph(ctx).edges
    out_edges = ambiguity_graph(joint_outcome_model(ctx, clf)).edges
    missing = sorted(obs_edges - out_edges)
    return _pass_or_fail([f"missing edge {e}" for e in missing], max(1, len(obs_edges)))


def check_witnesses(ctx: Context, clf: Classifier, tol: float) -> CheckResult:
    """Reported metric witnesses re-evaluate to the reported maxima."""
    model = joint_outcome_model(ctx, clf)
    problems = []
    for kind, (value, w) in (
        ("fair_treatment", fair_treatment_error(ctx, model)),
        ("predictive_parity", predictive_parity_error(ctx, model)),
        ("equal_base_rates", equal_base_rates_error(ctx)),
    ):
        if w is None:
            if value != 0:
                problems.append(f"{kind}: no witness for {value!r}")
            continue
        again = reevaluate(ctx, model, kind, w)
        if not (again == value or abs(again - value) <= 1e-12):
            problems.append(f"{kind}: witness gives {again!r}, reported {value!r}")
    return _pass_or_fail(problems, 3)


def witness_gap_grid(step: float = 1e-4, upper: float = 1.5) -> CheckResult:
    """ln(2/(1+e^(-d/2))) > d/5 on a grid over (0, upper)."""
    n = int(round(upper / step))
    deltas = np.arange(1, n) * step
    lhs = np.log(2.0 / (1.0 + np.exp(-deltas / 2.0)))
    bad = np.flatnonzero(~(lhs > deltas / 5.0))
    if bad.size:
        return CheckResult(FAIL, f"fails at delta={deltas[bad[0]]!r}")
    return CheckResult(PASS, f"{deltas.size} grid points")


# ---------------------------------------------------------------------------
# suite


@dataclass
class Trial:
    index: int
    seed: list
    ctx: Context
    clf: Classifier
    games: list
    post: Classifier


Property = Callable[[Trial, float], CheckResult]

PROPERTIES: dict[str, Property] = {
    "identity": lambda t, tol: check_identity(t.ctx, t.clf, tol),
    "ratio_bound": lambda t, tol: check_ratio_bound(t.ctx, t.clf, tol),
    "fair_gap_upper_bound": lambda t, tol: check_fair_gap_bound(t.ctx, t.clf, tol, t.games),
    "witness_lower_bound": lambda t, tol: check_witness_lower_bound(t.ctx, t.clf, tol),
    "mixed_vs_pure": lambda t, tol: check_mixed_vs_pure(t.ctx, t.clf, tol),
    "short_ambiguity_chains": lambda t, tol: check_short_chains(t.ctx, t.clf, tol),
    "base_rate_dichotomy": lambda t, tol: check_base_rate_dichotomy(t.ctx, t.clf, tol),
    "triviality_necessity": lambda t, tol: check_necessity(t.ctx, t.clf, tol),
    "triviality_sufficiency": lambda t, tol: check_sufficiency(t.ctx, tol, t.games),
    "postprocessing_closure": lambda t, tol: check_postprocessing(t.ctx, t.clf, t.post, tol),
    "observable_edges_survive": lambda t, tol: check_edge_refinement(t.ctx, t.clf, tol),
    "witness_reevaluation": lambda t, tol: check_witnesses(t.ctx, t.clf, tol),
}


def make_trial(config: TrialConfig, index: int) -> Trial:
    seed = [config.seed, index]
    rng = np.random.default_rng(seed)
    n_groups = int(rng.integers(1, config.max_groups + 1))
    n_classes = int(rng.integers(1, config.max_classes + 1))
    n_obs = int(rng.integers(1, config.max_observables + 1))
    n_out = int(rng.integers(1, config.max_outcomes + 1))
    sparse_ctx = bool(rng.random() < 0.5)
    sparse_clf = bool(rng.random() < 0.5)
    blocks = int(rng.integers(1, n_classes + 1)) if rng.random() < 0.3 else None
    ctx = random_context(seed + [1], n_groups, n_classes, n_obs, sparse=sparse_ctx, blocks=blocks)
    clf = random_classifier(seed + [2], ctx, n_out, sparse=sparse_clf)
    games = [
        random_game(seed + [3, n], ctx.classes, int(rng.integers(1, config.max_actions + 1)))
        for n in range(config.games_per_trial)
    ]
    post = random_postprocessor(seed + [4], clf, int(rng.integers(1, config.max_outcomes + 1)))
    return Trial(index, seed, ctx, clf, games, post)


def serialize_trial(trial: Trial) -> dict:
    return {
        "trial": trial.index,
        "seed": list(trial.seed),
        "context_csv": fio.serialize_context(trial.ctx),
        "classifier_csv": fio.serialize_classifier(trial.clf),
        "games": [g.to_dict() for g in trial.games],
        "postprocessor_csv": fio.serialize_classifier(trial.post),
    }


def load_trial(data: dict) -> Trial:
    ctx = fio.parse_context(data["context_csv"], mode="mass")
    return Trial(
        data["trial"],
        list(data["seed"]),
        ctx,
        fio.parse_classifier(data["classifier_csv"]),
        [DecisionGame.from_dict(g) for g in data["games"]],
        fio.parse_classifier(data["postprocessor_csv"]),
    )


def recheck(name: str, counterexample: dict, tol: float) -> CheckResult:
    """Re-run one property on a serialized counterexample."""
    return PROPERTIES[name](load_trial(counterexample), tol)


@dataclass
class PropertyTally:
    passed: int = 0
    failed: int = 0
    skipped: int = 0


@dataclass
class VerificationReport:
    config: TrialConfig
    tallies: dict
    counterexamples: dict = field(default_factory=dict)
    large_epsilon_trials: int = 0
    witness_gap_grid: CheckResult | None = None

    @property
    def all_passed(self) -> bool:
        grid_ok = self.witness_gap_grid is None or self.witness_gap_grid.passed
        return grid_ok and all(t.failed == 0 for t in self.tallies.values())

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "all_passed": self.all_passed,
            "properties": {name: asdict(t) for name, t in sorted(self.tallies.items())},
            "witness_gap_grid": None if self.witness_gap_grid is None else asdict(self.witness_gap_grid),
            "large_epsilon_trials": self.large_epsilon_trials,
            "counterexamples": dict(sorted(self.counterexamples.items())),
        }


def run_suite(config: TrialConfig = TrialConfig(), properties: dict[str, Property] | None = None) -> VerificationReport:
    properties = PROPERTIES if properties is None else properties
    tallies = {name: PropertyTally() for name in properties}
    report = VerificationReport(config, tallies, witness_gap_grid=witness_gap_grid())
    for index in range(config.trials):
        trial = make_trial(config, index)
        eps = _eps(trial.ctx, joint_outcome_model(trial.ctx, trial.clf))
        if LARGE_EPSILON <= eps < math.inf:
            report.large_epsilon_trials += 1
        for name, prop in properties.items():
            result = prop(trial, config.tolerance)
            tally = tallies[name]
            if result.status == PASS:
                tally.passed += 1
            elif result.status == SKIP:
                tally.skipped += 1
            else:
                tally.failed += 1
                if name not in report.counterexamples:
                    report.counterexamples[name] = {"detail": result.detail, **serialize_trial(trial)}
    return report
