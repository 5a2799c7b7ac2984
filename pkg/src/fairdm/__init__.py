"""Fairness audits for computer-aided decision making."""

__version__ = "0.1.0"

from fairdm.context import (  # noqa: E402
    Classifier,
    Context,
    JointOutcomeModel,
    base_rates,
    class_given_outcome,
    compose_postprocess,
    cond_mass,
    joint_outcome_model,
    mult_distance,
    outcome_given_class,
    restrict_to_classes,
)
from fairdm.game import (  # noqa: E402
    BehavioralStrategy,
    DecisionGame,
    best_response_gap,
    build_witness_game,
    expected_utility,
    optimal_fair_strategy,
    rational_fairness_lower_bound,
    rational_fairness_upper_bound,
)
from fairdm.metrics import (  # noqa: E402
    audit,
    equal_base_rates_error,
    fair_treatment_error,
    predictive_parity_error,
    statistical_parity_error,
)
from fairdm.triviality import (  # noqa: E402
    Partition,
    ambiguity_distance,
    ambiguity_graph,
    subgroup_perfect_prediction,
    synthesize_trivial_classifier,
    triviality_error,
)
