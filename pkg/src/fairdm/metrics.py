"""Fairness error measures over a context/classifier pair, each with the cell that attains it.

All maxima range over unordered group pairs ``(X, Y)`` with ``X`` before ``Y``
in the context's group order; ties keep the first cell in
(group pair, class/outcome) lexicographic order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np

from fairdm.context import (
    Classifier,
    Context,
    JointOutcomeModel,
    joint_outcome_model,
    mult_distance,
    mult_distance_array,
)


@dataclass(frozen=True)
class Witness:
    """Where a maximum is attained: the two groups and the (first, second) indexing labels."""

    group_x: str
    group_y: str
    first: str
    second: str | None = None


@dataclass(frozen=True)
class AuditReport:
    fair_treatment: float
    fair_treatment_witness: Witness | None
    predictive_parity: float
    predictive_parity_witness: Witness | None
    statistical_parity_tv: float
    statistical_parity_maxdiv: float
    equal_base_rates: float
    equal_base_rates_witness: Witness | None

    def to_dict(self) -> dict:
        return asdict(self)


def _pairwise_max(table: np.ndarray, labels: tuple[tuple, ...], groups: tuple):
    """Largest multiplicative distance between rows ``table[X]`` and ``table[Y]`` over group pairs.

    ``table`` is indexed ``[group, ...]``; ``labels`` names the remaining axes.
    """
    best, witness = 0.0, None
    for x, y in combinations(range(len(groups)), 2):
        dist = mult_distance_array(table[x], table[y])
        flat = int(np.argmax(dist))
        value = float(dist.flat[flat])
        if witness is None or value > best:
            idx = np.unravel_index(flat, dist.shape)
            names = [axis_labels[i] for axis_labels, i in zip(labels, idx)]
            best = value
            witness = Witness(groups[x], groups[y], *names)
    return best, witness


def _model(ctx: Context, clf: Classifier | JointOutcomeModel) -> JointOutcomeModel:
    return clf if isinstance(clf, JointOutcomeModel) else joint_outcome_model(ctx, clf)


def fair_treatment_error(ctx: Context, clf: Classifier | JointOutcomeModel) -> tuple[float, Witness | None]:
    """Max-divergence between groups of the outcome distribution given the true class.

    Witness is ``(X, Y, class, outcome)``. A class present in one group and absent
    from another gives ``inf``.
    """
    model = _model(ctx, clf)
    return _pairwise_max(model.outcome_given_class_table, (model.classes, model.outcomes), model.groups)


def predictive_parity_error(ctx: Context, clf: Classifier | JointOutcomeModel) -> tuple[float, Witness | None]:
    """Max-divergence between groups of the class distribution given the outcome.

    Witness is ``(X, Y, outcome, class)``.
    """
    model = _model(ctx, clf)
    return _pairwise_max(model.class_given_outcome_table, (model.outcomes, model.classes), model.groups)


def _outcome_marginals(model: JointOutcomeModel) -> np.ndarray:
    go = model.group_outcome
    return go / go.sum(axis=1, keepdims=True)


def statistical_parity_error(ctx: Context, clf: Classifier | JointOutcomeModel, metric: str = "total-variation") -> float:
    """Largest distance between two groups' outcome distributions.

    ``metric`` is ``"total-variation"`` or ``"max-divergence"``.
    """
    model = _model(ctx, clf)
    marg = _outcome_marginals(model)
    worst = 0.0
    for x, y in combinations(range(len(model.groups)), 2):
        if metric == "total-variation":
            value = 0.5 * float(np.abs(marg[x] - marg[y]).sum())
        elif metric == "max-divergence":
            value = float(mult_distance_array(marg[x], marg[y]).max())
        else:
            raise ValueError(f"unknown metric {metric!r}")
        worst = max(worst, value)
    return worst


def equal_base_rates_error(ctx: Context) -> tuple[float, Witness | None]:
    """Largest multiplicative gap in a class's base rate between two groups; witness ``(X, Y, class)``."""
    return _pairwise_max(ctx.base_rate_table, (ctx.classes,), ctx.groups)


def audit(ctx: Context, clf: Classifier) -> AuditReport:
    model = joint_outcome_model(ctx, clf)
    ft, ft_w = fair_treatment_error(ctx, model)
    pp, pp_w = predictive_parity_error(ctx, model)
    ebr, ebr_w = equal_base_rates_error(ctx)
    return AuditReport(
        fair_treatment=ft,
        fair_treatment_witness=ft_w,
        predictive_parity=pp,
        predictive_parity_witness=pp_w,
        statistical_parity_tv=statistical_parity_error(ctx, model, "total-variation"),
        statistical_parity_maxdiv=statistical_parity_error(ctx, model, "max-divergence"),
        equal_base_rates=ebr,
        equal_base_rates_witness=ebr_w,
    )


def reevaluate(ctx: Context, clf: Classifier | JointOutcomeModel, kind: str, witness: Witness) -> float:
    """Recompute the multiplicative distance at a reported witness cell."""
    model = _model(ctx, clf)
    x, y = model.group_index(witness.group_x), model.group_index(witness.group_y)
    if kind == "fair_treatment":
        c, o = model.class_index(witness.first), model.outcome_index(witness.second)
        table = model.outcome_given_class_table
        return mult_distance(table[x, c, o], table[y, c, o])
    if kind == "predictive_parity":
        o, c = model.outcome_index(witness.first), model.class_index(witness.second)
        table = model.class_given_outcome_table
        return mult_distance(table[x, o, c], table[y, o, c])
    if kind == "equal_base_rates":
        c = ctx.class_index(witness.first)
        return mult_distance(ctx.base_rate_table[x, c], ctx.base_rate_table[y, c])
    raise ValueError(f"unknown metric kind {kind!r}")
