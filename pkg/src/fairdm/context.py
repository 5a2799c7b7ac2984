"""Classification contexts, classifiers and the probability queries built on them.

A context is a finite joint mass over ``(group, class, observable)`` cells.
A classifier is a row-stochastic channel from observables to outcomes. Pairing
the two marginalizes the observable away and gives a joint mass over
``(group, class, outcome)``.

Conditional probabilities follow the convention that conditioning on a
zero-mass event yields probability 0 (rather than being undefined). A mass is
*positive* only if it is strictly greater than zero in storage; there is no
thresholding anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from fairdm.errors import PairingError

ROW_SUM_TOL = 1e-9

Cell = tuple[str, str, str]
CellPredicate = Callable[[str, str, str], bool]


def _labels(values: Iterable, what: str) -> tuple:
    out = tuple(values)
    if len(set(out)) != len(out):
        raise ValueError(f"duplicate {what} labels: {out!r}")
    return out


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


def _index(labels: tuple, label, what: str) -> int:
    try:
        return labels.index(label)
    except ValueError:
        raise KeyError(f"unknown {what} {label!r}") from None


def safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """Elementwise ``num / den`` with the result pinned to 0 wherever ``den == 0``."""
    num, den = np.broadcast_arrays(np.asarray(num, dtype=float), np.asarray(den, dtype=float))
    out = np.zeros(num.shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def mult_distance(x: float, y: float) -> float:
    """Multiplicative distance ``ln max(x/y, y/x)`` between two nonnegative reals.

    Two zeros are at distance 0; a zero against a positive value is at
    distance ``inf``.
    """
    if x < 0 or y < 0 or math.isnan(x) or math.isnan(y):
        raise ValueError(f"multiplicative distance needs nonnegative inputs, got ({x}, {y})")
    if x > 0 and y > 0:
        return math.log(max(x, y) / min(x, y))
    if x == 0 and y == 0:
        return 0.0
    return math.inf


def mult_distance_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mult_distance`; agrees with it bit for bit."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("multiplicative distance needs nonnegative inputs")
    out = np.full(a.shape, math.inf)
    both = (a > 0) & (b > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        hi, lo = np.maximum(a[both], b[both]), np.minimum(a[both], b[both])
        out[both] = np.log(hi / lo)
    out[(a == 0) & (b == 0)] = 0.0
    return out


@dataclass(frozen=True, eq=False)
class Context:
    """Finite joint distribution over individuals' group, class and observable features.

    ``mass[g, c, v]`` is the probability that a random individual is in group
    ``groups[g]``, has class ``classes[c]`` and shows observable ``observables[v]``.
    Masses are renormalized to sum to 1 on construction. Every class and every
    group must carry positive mass.
    """

    groups: tuple
    classes: tuple
    observables: tuple
    mass: np.ndarray

    def __post_init__(self):
        groups = _labels(self.groups, "group")
        classes = _labels(self.classes, "class")
        observables = _labels(self.observables, "observable")
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.shape != (len(groups), len(classes), len(observables)):
            raise ValueError(
                f"mass has shape {mass.shape}, expected {(len(groups), len(classes), len(observables))}"
            )
        if not groups or not classes or not observables:
            raise ValueError("a context needs at least one group, class and observable")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ValueError("masses must be finite and nonnegative")
        total = mass.sum()
        if total <= 0:
            raise ValueError("context has zero total mass")
        if total != 1.0:
            mass = mass / total
        for totals, labels, what in (
            (mass.sum(axis=(0, 2)), classes, "class"),
            (mass.sum(axis=(1, 2)), groups, "group"),
        ):
            empty = [labels[i] for i in np.flatnonzero(totals <= 0)]
            if empty:
                raise ValueError(f"{what} without mass: {empty!r}")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "observables", observables)
        object.__setattr__(self, "mass", _frozen(mass))

    @classmethod
    def from_cells(cls, cells: Mapping[Cell, float] | Iterable[tuple[str, str, str, float]]) -> Context:
        """Build a context from ``(group, class, observable) -> mass``; labels ordered by first appearance."""
        items = cells.items() if isinstance(cells, Mapping) else (((g, c, v), w) for g, c, v, w in cells)
        groups: dict = {}
        classes: dict = {}
        observables: dict = {}
        acc: dict = {}
        for (g, c, v), w in items:
            groups.setdefault(g, len(groups))
            classes.setdefault(c, len(classes))
            observables.setdefault(v, len(observables))
            acc[g, c, v] = acc.get((g, c, v), 0.0) + float(w)
        mass = np.zeros((len(groups), len(classes), len(observables)))
        for (g, c, v), w in acc.items():
            mass[groups[g], classes[c], observables[v]] = w
        return cls(tuple(groups), tuple(classes), tuple(observables), mass)

    @property
    def k(self) -> int:
        return len(self.classes)

    def group_index(self, group) -> int:
        return _index(self.groups, group, "group")

    def class_index(self, cls) -> int:
        return _index(self.classes, cls, "class")

    def observable_index(self, observable) -> int:
        return _index(self.observables, observable, "observable")

    @cached_property
    def group_class(self) -> np.ndarray:
        """Joint mass over (group, class)."""
        return self.mass.sum(axis=2)

    @cached_property
    def base_rate_table(self) -> np.ndarray:
        """``[g, c] -> Pr[f = c | group g]``."""
        gc = self.group_class
        return safe_divide(gc, gc.sum(axis=1, keepdims=True))

    def cells(self) -> Iterable[tuple[str, str, str, float]]:
        for (g, c, v), w in np.ndenumerate(self.mass):
            yield self.groups[g], self.classes[c], self.observables[v], float(w)


@dataclass(frozen=True, eq=False)
class Classifier:
    """Stochastic channel: ``channel[v, o] = Pr[C outputs outcomes[o] | observable v]``."""

    observables: tuple
    outcomes: tuple
    channel: np.ndarray

    def __post_init__(self):
        observables = _labels(self.observables, "observable")
        outcomes = _labels(self.outcomes, "outcome")
        channel = np.asarray(self.channel, dtype=np.float64)
        if channel.shape != (len(observables), len(outcomes)):
            raise ValueError(f"channel has shape {channel.shape}, expected {(len(observables), len(outcomes))}")
        if not outcomes:
            raise ValueError("a classifier needs at least one outcome")
        if not np.all(np.isfinite(channel)) or np.any(channel < 0):
            raise ValueError("channel entries must be finite and nonnegative")
        sums = channel.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if bad.size:
            v = observables[bad[0]]
            raise ValueError(f"channel row for observable {v!r} sums to {sums[bad[0]]!r}, not 1")
        object.__setattr__(self, "observables", observables)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "channel", _frozen(channel))

    @classmethod
    def deterministic(cls, mapping: Mapping, outcomes: Sequence | None = None) -> Classifier:
        """Classifier sending each observable to one outcome."""
        observables = tuple(mapping)
        if outcomes is None:
            outcomes = tuple(dict.fromkeys(mapping.values()))
        outcomes = tuple(outcomes)
        channel = np.zeros((len(observables), len(outcomes)))
        for v, o in mapping.items():
            channel[observables.index(v), _index(outcomes, o, "outcome")] = 1.0
        return cls(observables, outcomes, channel)

    @classmethod
    def constant(cls, observables: Sequence, distribution: Mapping) -> Classifier:
        """Classifier ignoring its input and drawing from ``distribution``."""
        outcomes = tuple(distribution)
        row = np.array([distribution[o] for o in outcomes], dtype=float)
        return cls(tuple(observables), outcomes, np.tile(row, (len(tuple(observables)), 1)))

    def aligned_to(self, observables: tuple) -> np.ndarray:
        """Channel rows reordered to ``observables``; the label sets must match exactly."""
        if set(observables) != set(self.observables):
            missing = sorted(map(str, set(observables) - set(self.observables)))
            extra = sorted(map(str, set(self.observables) - set(observables)))
            raise PairingError(f"observable sets differ (missing {missing}, extra {extra})")
        if observables == self.observables:
            return self.channel
        order = [self.observables.index(v) for v in observables]
        return self.channel[order]


@dataclass(frozen=True, eq=False)
class JointOutcomeModel:
    """Joint mass over (group, class, outcome) induced by pairing a context with a classifier.

    Only outcomes with positive total mass are kept, so ``outcomes`` is the
    support of the classifier's output under the context.
    """

    groups: tuple
    classes: tuple
    outcomes: tuple
    mass: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mass", _frozen(self.mass))

    def group_index(self, group) -> int:
        return _index(self.groups, group, "group")

    def class_index(self, cls) -> int:
        return _index(self.classes, cls, "class")

    def outcome_index(self, outcome) -> int:
        return _index(self.outcomes, outcome, "outcome")

    @cached_property
    def group_outcome(self) -> np.ndarray:
        """Joint mass over (group, outcome)."""
        return self.mass.sum(axis=1)

    @cached_property
    def type_support(self) -> np.ndarray:
        """Boolean ``[g, o]``: the decision-maker's type ``(g, o)`` occurs with positive probability."""
        return self.group_outcome > 0

    @property
    def supported_types(self) -> frozenset:
        g_idx, o_idx = np.nonzero(self.type_support)
        return frozenset((self.groups[g], self.outcomes[o]) for g, o in zip(g_idx, o_idx))

    @cached_property
    def outcome_given_class_table(self) -> np.ndarray:
        """``[g, c, o] -> Pr[C = o | f = c, group g]`` (zero rows for zero-mass cells)."""
        return safe_divide(self.mass, self.mass.sum(axis=2, keepdims=True))

    @cached_property
    def class_given_outcome_table(self) -> np.ndarray:
        """``[g, o, c] -> Pr[f = c | C = o, group g]`` (zero rows for unsupported types)."""
        return safe_divide(self.mass, self.group_outcome[:, None, :]).transpose(0, 2, 1)

    @cached_property
    def base_rate_table(self) -> np.ndarray:
        gc = self.mass.sum(axis=2)
        return safe_divide(gc, gc.sum(axis=1, keepdims=True))


def joint_outcome_model(ctx: Context, clf: Classifier) -> JointOutcomeModel:
    """Push the context through the classifier's channel."""
    channel = clf.aligned_to(ctx.observables)
    mass = np.einsum("gcv,vo->gco", ctx.mass, channel)
    keep = mass.sum(axis=(0, 1)) > 0
    outcomes = tuple(o for o, kept in zip(clf.outcomes, keep) if kept)
    return JointOutcomeModel(ctx.groups, ctx.classes, outcomes, mass[:, :, keep])


def cond_mass(table: Context | JointOutcomeModel, event: CellPredicate, given: CellPredicate) -> float:
    """``Pr[event | given]`` over the cells of a mass table, 0 when ``given`` has zero mass.

    Predicates are called as ``pred(group, class, column)`` where the column is
    the observable (for a context) or the outcome (for a joint model).
    """
    columns = table.observables if isinstance(table, Context) else table.outcomes
    num = den = 0.0
    for (g, c, v), w in np.ndenumerate(table.mass):
        if w == 0:
            continue
        labels = (table.groups[g], table.classes[c], columns[v])
        if given(*labels):
            den += w
            if event(*labels):
                num += w
    return num / den if den > 0 else 0.0


def outcome_given_class(model: JointOutcomeModel, group, cls) -> dict:
    """``{o: Pr[C = o | f = cls, group]}``; all zeros when that (group, class) has no mass."""
    row = model.outcome_given_class_table[model.group_index(group), model.class_index(cls)]
    return dict(zip(model.outcomes, row.tolist()))


def class_given_outcome(model: JointOutcomeModel, group, outcome) -> dict:
    """``{c: Pr[f = c | C = outcome, group]}``; all zeros for an unsupported type."""
    row = model.class_given_outcome_table[model.group_index(group), model.outcome_index(outcome)]
    return dict(zip(model.classes, row.tolist()))


def base_rates(ctx: Context, group) -> dict:
    return dict(zip(ctx.classes, ctx.base_rate_table[ctx.group_index(group)].tolist()))


def compose_postprocess(clf: Classifier, post: Classifier | np.ndarray, outcomes: Sequence | None = None) -> Classifier:
    """Classifier that runs ``clf`` and then feeds its outcome through ``post``.

    ``post`` is either a :class:`Classifier` whose observables are ``clf``'s
    outcomes, or a raw row-stochastic matrix indexed by ``clf.outcomes`` together
    with the new ``outcomes`` labels.
    """
    if not isinstance(post, Classifier):
        post = np.asarray(post, dtype=float)
        if outcomes is None:
            outcomes = tuple(range(post.shape[1])) if post.ndim == 2 else ()
        if post.ndim != 2 or post.shape[0] != len(clf.outcomes):
            raise PairingError(f"post-processing matrix of shape {post.shape} does not match {len(clf.outcomes)} outcomes")
        post = Classifier(clf.outcomes, tuple(outcomes), post)
    channel = post.aligned_to(clf.outcomes)
    return Classifier(clf.observables, post.outcomes, clf.channel @ channel)


def restrict_to_classes(ctx: Context, subset: Iterable) -> Context:
    """Condition the context on the class lying in ``subset``; groups left without mass are dropped."""
    keep = {ctx.class_index(c) for c in subset}
    if not keep:
        raise ValueError("cannot restrict to an empty class subset")
    cls_idx = sorted(keep)
    mass = ctx.mass[:, cls_idx, :]
    if mass.sum() <= 0:
        raise ValueError("class subset has zero mass")
    grp_idx = [g for g in range(len(ctx.groups)) if mass[g].sum() > 0]
    return Context(
        tuple(ctx.groups[g] for g in grp_idx),
        tuple(ctx.classes[c] for c in cls_idx),
        ctx.observables,
        mass[grp_idx],
    )
