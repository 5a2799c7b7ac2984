import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fairdm.context import (
    Classifier,
    Context,
    base_rates,
    class_given_outcome,
    compose_postprocess,
    cond_mass,
    joint_outcome_model,
    mult_distance,
    mult_distance_array,
    outcome_given_class,
    restrict_to_classes,
)
from fairdm.errors import PairingError

positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)


class TestMultDistance:
    def test_values(self):
        assert mult_distance(0.4485, 0.2345) == pytest.approx(0.6485, abs=1e-4)
        assert mult_distance(0.37, 0.37) == 0.0
        assert mult_distance(0.0, 0.0) == 0.0
        assert mult_distance(0.01, 0.0) == math.inf
        assert mult_distance(0.0, 0.01) == math.inf

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            mult_distance(-0.1, 0.2)
        with pytest.raises(ValueError):
            mult_distance(math.nan, 0.2)

    @given(positive, positive, positive)
    def test_symmetric_and_triangle(self, a, b, c):
        assert mult_distance(a, b) == mult_distance(b, a)
        assert mult_distance(a, c) <= mult_distance(a, b) + mult_distance(b, c) + 1e-12

    @given(positive, positive, st.floats(min_value=1e-3, max_value=1e3))
    def test_scale_invariant(self, a, b, s):
        assert mult_distance(a * s, b * s) == pytest.approx(mult_distance(a, b), abs=1e-12)

    def test_array_matches_scalar(self):
        a = np.array([0.0, 0.0, 0.3, 0.2, 1e-300])
        b = np.array([0.0, 0.1, 0.0, 0.5, 1e-300])
        expected = [mult_distance(x, y) for x, y in zip(a, b)]
        assert mult_distance_array(a, b).tolist() == expected


class TestContext:
    def test_renormalizes(self):
        ctx = Context.from_cells([("X", "c", "a", 2.0), ("Y", "c", "a", 6.0)])
        assert ctx.mass.sum() == pytest.approx(1.0, abs=1e-12)
        assert ctx.mass[1, 0, 0] == pytest.approx(0.75)

    def test_mass_is_read_only(self, ctx_b):
        with pytest.raises(ValueError):
            ctx_b.mass[0, 0, 0] = 1.0

    def test_zero_class_rejected(self):
        with pytest.raises(ValueError, match="class"):
            Context(("X",), ("c0", "c1"), ("a",), np.array([[[1.0], [0.0]]]))

    def test_zero_group_rejected(self):
        with pytest.raises(ValueError, match="group"):
            Context(("X", "Y"), ("c",), ("a",), np.array([[[1.0]], [[0.0]]]))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Context(("X",), ("c",), ("a", "b"), np.array([[[1.5, -0.5]]]))

    def test_first_appearance_order(self):
        ctx = Context.from_cells([("Y", "z", "q", 1), ("X", "a", "p", 1)])
        assert ctx.groups == ("Y", "X")
        assert ctx.classes == ("z", "a")
        assert ctx.k == 2

    def test_base_rates(self, ctx_b):
        assert base_rates(ctx_b, "X") == pytest.approx({"class1": 0.56, "class0": 0.44})
        assert base_rates(ctx_b, "Y") == pytest.approx({"class1": 0.42, "class0": 0.58})
        with pytest.raises(KeyError):
            base_rates(ctx_b, "Z")

    def test_cond_mass(self, ctx_b):
        assert cond_mass(ctx_b, lambda g, c, v: c == "class1", lambda g, c, v: g == "X") == pytest.approx(0.56)
        assert cond_mass(ctx_b, lambda g, c, v: True, lambda g, c, v: g == "nobody") == 0.0
        assert cond_mass(ctx_b, lambda g, c, v: g == "Y", lambda g, c, v: g == "Y") == 1.0


class TestClassifier:
    def test_row_sum_enforced(self):
        with pytest.raises(ValueError, match="'a'"):
            Classifier(("a",), ("x", "y"), np.array([[0.5, 0.4]]))

    def test_pairing_mismatch(self, ctx_b):
        clf = Classifier.constant(["b"], {"hi": 1.0})
        with pytest.raises(PairingError):
            joint_outcome_model(ctx_b, clf)

    def test_rows_realigned_by_label(self, ctx_a):
        clf = Classifier(("b", "a"), ("x", "y"), np.array([[0.0, 1.0], [1.0, 0.0]]))
        model = joint_outcome_model(ctx_a, clf)
        assert outcome_given_class(model, "X", "c0") == {"x": 1.0, "y": 0.0}
        assert outcome_given_class(model, "X", "c1") == {"x": 0.0, "y": 1.0}


class TestJointOutcomeModel:
    def test_ctx_b_values(self, ctx_b, clf_b):
        model = joint_outcome_model(ctx_b, clf_b)
        assert model.mass[0, 0, 0] == pytest.approx(0.196)
        assert outcome_given_class(model, "Y", "class0") == pytest.approx({"hi": 0.7, "lo": 0.3})
        assert class_given_outcome(model, "X", "hi")["class1"] == pytest.approx(0.56)
        assert class_given_outcome(model, "Y", "hi")["class1"] == pytest.approx(0.42)
        assert model.supported_types == frozenset({("X", "hi"), ("X", "lo"), ("Y", "hi"), ("Y", "lo")})

    def test_identity_channel_relabels(self, ctx_a):
        model = joint_outcome_model(ctx_a, Classifier.deterministic({"a": "a", "b": "b"}))
        np.testing.assert_array_equal(model.mass, ctx_a.mass)

    def test_unreached_outcome_pruned(self, ctx_b):
        clf = Classifier(("a",), ("hi", "never"), np.array([[1.0, 0.0]]))
        model = joint_outcome_model(ctx_b, clf)
        assert model.outcomes == ("hi",)

    def test_zero_conditioning(self):
        ctx = Context.from_cells([("X", "c0", "a", 1), ("Y", "c1", "a", 1), ("Y", "c0", "b", 1)])
        model = joint_outcome_model(ctx, Classifier.deterministic({"a": "A", "b": "B"}))
        assert outcome_given_class(model, "X", "c1") == {"A": 0.0, "B": 0.0}
        assert class_given_outcome(model, "X", "B") == {"c0": 0.0, "c1": 0.0}
        assert ("X", "B") not in model.supported_types

    @settings(max_examples=60, deadline=None)
    @given(
        arrays(float, (2, 3, 4), elements=st.floats(0.01, 5.0)),
        arrays(float, (4, 3), elements=st.floats(0.0, 5.0)),
    )
    def test_mass_conserved_and_bayes(self, mass, channel):
        channel[:, 0] += 0.1
        channel /= channel.sum(axis=1, keepdims=True)
        ctx = Context(("X", "Y"), ("c0", "c1", "c2"), ("a", "b", "c", "d"), mass)
        model = joint_outcome_model(ctx, Classifier(ctx.observables, ("o0", "o1", "o2"), channel))
        assert model.mass.sum() == pytest.approx(1.0, abs=1e-9)
        ogc, cgo, br = model.outcome_given_class_table, model.class_given_outcome_table, model.base_rate_table
        go = model.group_outcome
        gmass = model.mass.sum(axis=(1, 2))
        for g in range(2):
            for c in range(3):
                for o in range(len(model.outcomes)):
                    # Pr[o | c] Pr[c] = Pr[c | o] Pr[o], within group g
                    lhs = ogc[g, c, o] * br[g, c]
                    rhs = cgo[g, o, c] * go[g, o] / gmass[g]
                    assert lhs == pytest.approx(rhs, abs=1e-9)


class TestPostprocess:
    def test_identity_channel(self, ctx_b, clf_b):
        composed = compose_postprocess(clf_b, np.eye(2), outcomes=clf_b.outcomes)
        np.testing.assert_allclose(composed.channel, clf_b.channel)

    def test_threshold(self):
        scores = ("0", ".25", ".5", ".75", "1")
        clf = Classifier.deterministic({s: s for s in scores})
        thresh = np.array([[1, 0], [1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
        composed = compose_postprocess(clf, thresh, outcomes=("0", "1"))
        assert composed.channel[:, 1].tolist() == [0, 0, 0, 1, 1]

    def test_shape_mismatch(self, clf_b):
        with pytest.raises(PairingError):
            compose_postprocess(clf_b, np.eye(3))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_associative_and_stochastic(self, seed):
        rng = np.random.default_rng(seed)
        m1, m2, m3 = (rng.dirichlet(np.ones(3), size=3) for _ in range(3))
        clf = Classifier(("a", "b", "c"), (0, 1, 2), m1)
        left = compose_postprocess(compose_postprocess(clf, m2), m3)
        right = compose_postprocess(clf, m2 @ m3)
        np.testing.assert_allclose(left.channel, right.channel, atol=1e-12)
        np.testing.assert_allclose(left.channel.sum(axis=1), 1.0, atol=1e-12)


class TestRestrict:
    def test_all_classes_unchanged(self, ctx_b):
        r = restrict_to_classes(ctx_b, ctx_b.classes)
        np.testing.assert_allclose(r.mass, ctx_b.mass)

    def test_single_class(self, ctx_b):
        r = restrict_to_classes(ctx_b, ["class1"])
        assert r.mass[0].sum() == pytest.approx(0.28 / 0.49)
        assert base_rates(r, "Y") == {"class1": 1.0}

    def test_drops_empty_group(self, ctx_a):
        ctx = Context.from_cells([("X", "c0", "a", 1), ("Y", "c1", "a", 1)])
        assert restrict_to_classes(ctx, ["c0"]).groups == ("X",)

    def test_empty_subset(self, ctx_b):
        with pytest.raises(ValueError):
            restrict_to_classes(ctx_b, [])
