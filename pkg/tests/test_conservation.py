import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from emodel import (
    MAX,
    SUM,
    ComposabilityReport,
    EnergyModel,
    ModelKind,
    Operator,
    OperatorTable,
    ViolationKind,
    check_conservation,
    compose,
    generate_cases,
    negative_witness,
    predict,
    strong_composability_check,
    sum_plus_delta,
    verify_weak_composability,
)
from emodel.conservation import COUNT_RANGE, WILDCARD
from emodel.core import PmcVector
from helpers import make_run


def linear_model(coefficients, names=None, intercept=0.0,
                 kind=ModelKind.UNCONSTRAINED):
    names = names or tuple(f"P{i + 1}" for i in range(len(coefficients)))
    return EnergyModel(
        pmc_names=names, intercept=intercept,
        coefficients=tuple(coefficients), kind=kind,
    )


# --- operators -------------------------------------------------------------


def test_operator_arithmetic():
    assert SUM.apply(2.0, 3.0) == 5.0
    assert MAX.apply(2.0, 3.0) == 3.0
    assert sum_plus_delta(4.0).apply(2.0, 3.0) == 9.0
    assert sum_plus_delta(-1.5).apply(2.0, 3.0) == 3.5


def test_operator_validation():
    with pytest.raises(ValueError):
        Operator("median")
    with pytest.raises(ValueError):
        Operator("max", delta=1.0)
    with pytest.raises(ValueError):
        Operator("sum_plus_delta", delta=math.inf)
    assert sum_plus_delta(2.5).label() == "sum_plus_delta(2.5)"
    assert MAX.label() == "max"


def test_operator_table_precedence():
    table = OperatorTable(overrides={
        ("appa", "appb", 1): MAX,
        (WILDCARD, WILDCARD, 1): sum_plus_delta(9.0),
    })
    assert table.operator_for("appa", "appb", 1) is MAX
    assert table.operator_for("x", "y", 1) == sum_plus_delta(9.0)
    assert table.operator_for("appa", "appb", 2) is SUM


def test_operator_table_validation():
    with pytest.raises(ValueError):
        OperatorTable(overrides={("a", "b", 0): MAX})
    with pytest.raises(TypeError):
        OperatorTable(overrides={("a", "b", 1): "max"})
    table = OperatorTable(overrides={(WILDCARD, WILDCARD, 5): MAX})
    with pytest.raises(ValueError, match="exceeds"):
        table.check_indices("a", "b", 2)


# --- composition -----------------------------------------------------------


def test_compose_default_is_addition():
    a = PmcVector(("P1", "P2"), (1.0, 10.0))
    b = PmcVector(("P1", "P2"), (2.0, 20.0))
    assert compose(a, b).counts == (3.0, 30.0)


def test_compose_aligns_names():
    a = PmcVector(("P1", "P2"), (1.0, 10.0))
    b = PmcVector(("P2", "P1"), (20.0, 2.0))
    composed = compose(a, b)
    assert composed.names == ("P1", "P2")
    assert composed.counts == (3.0, 30.0)


def test_compose_rejects_different_name_sets():
    a = PmcVector(("P1",), (1.0,))
    b = PmcVector(("P2",), (2.0,))
    with pytest.raises(ValueError, match="name sets differ"):
        compose(a, b)


def test_compose_with_positional_override():
    a = PmcVector(("P1", "P2"), (5.0, 10.0))
    b = PmcVector(("P1", "P2"), (3.0, 20.0))
    table = OperatorTable(overrides={(WILDCARD, WILDCARD, 1): MAX})
    assert compose(a, b, table).counts == (5.0, 30.0)


def test_compose_app_keyed_override():
    names = ("P1",)
    run_a = make_run("appa", names, (5.0,), 1.0)
    run_b = make_run("appb", names, (3.0,), 1.0)
    table = OperatorTable(overrides={("appa", "appb", 1): MAX})
    assert compose(run_a, run_b, table).counts == (5.0,)
    # key does not match the reversed pair, so it falls back to the default
    assert compose(run_b, run_a, table).counts == (8.0,)


def test_compose_index_out_of_range():
    a = PmcVector(("P1",), (1.0,))
    table = OperatorTable(overrides={(WILDCARD, WILDCARD, 2): MAX})
    with pytest.raises(ValueError, match="exceeds"):
        compose(a, a, table)


# --- conservation checks ---------------------------------------------------


def test_clean_model_has_no_violations():
    report = check_conservation(linear_model((1.0, 2.0), kind=ModelKind.ZERO_INTERCEPT))
    assert report.clean
    assert report.violations == ()
    assert negative_witness(linear_model((1.0, 2.0), kind=ModelKind.ZERO_INTERCEPT)) is None


def test_positive_intercept_flagged_without_witness():
    report = check_conservation(linear_model((1.0,), intercept=42.0))
    kinds = [v.kind for v in report.violations]
    assert kinds == [ViolationKind.NONZERO_INTERCEPT]
    assert report.violations[0].value == 42.0
    assert not report.clean


def test_negative_coefficient_yields_witness():
    model = linear_model((2.0, -0.5, -3.0), intercept=10.0)
    report = check_conservation(model)
    kinds = [v.kind for v in report.violations]
    assert kinds == [
        ViolationKind.NONZERO_INTERCEPT,
        ViolationKind.NEGATIVE_COEFFICIENT,
        ViolationKind.NEGATIVE_COEFFICIENT,
        ViolationKind.NEGATIVE_PREDICTION_WITNESS,
    ]
    witness_violation = report.violations[-1]
    witness = witness_violation.witness
    # weight goes on the most negative coefficient, P3
    assert witness.get("P3") > 0
    assert witness.get("P1") == witness.get("P2") == 0.0
    assert witness_violation.predicted_j == predict(model, witness)
    assert witness_violation.predicted_j < 0
    assert witness_violation.predicted_j == pytest.approx(10.0 - 2.0 * 10.0)


def test_negative_intercept_zero_vector_witness():
    model = linear_model((1.0, 0.0), intercept=-5.0)
    report = check_conservation(model)
    kinds = [v.kind for v in report.violations]
    assert kinds == [
        ViolationKind.NONZERO_INTERCEPT,
        ViolationKind.NEGATIVE_PREDICTION_WITNESS,
    ]
    witness = report.violations[-1].witness
    assert witness.counts == (0.0, 0.0)
    assert report.violations[-1].predicted_j == -5.0


coefficient = st.one_of(
    st.just(0.0), st.floats(1e-6, 10.0), st.floats(-10.0, -1e-6)
)


@given(
    intercept=st.floats(-100.0, 100.0),
    coefficients=st.lists(coefficient, min_size=1, max_size=4),
)
def test_witness_exists_iff_negative_reachable(intercept, coefficients):
    model = linear_model(coefficients, intercept=intercept)
    witness = negative_witness(model)
    reachable = intercept < 0 or any(c < 0 for c in coefficients)
    assert (witness is not None) == reachable
    if witness is not None:
        assert all(c >= 0 for c in witness.counts)
        assert predict(model, witness) < 0


def test_witness_clamps_vanishing_coefficient():
    # so small a slope that the ideal witness count overflows: the count is
    # clamped, and with a zero intercept the prediction still goes negative
    model = linear_model((-2.5e-309,), intercept=0.0)
    witness = negative_witness(model)
    assert witness is not None
    assert math.isfinite(witness.counts[0])
    assert predict(model, witness) < 0


def test_witness_unreachable_within_float_range():
    # the negative term cannot overcome the intercept with any finite count
    model = linear_model((-2.5e-309,), intercept=10.0)
    assert negative_witness(model) is None
    kinds = [v.kind for v in check_conservation(model).violations]
    assert kinds == [
        ViolationKind.NONZERO_INTERCEPT,
        ViolationKind.NEGATIVE_COEFFICIENT,
    ]


def test_violation_report_json():
    report = check_conservation(linear_model((-1.0,), intercept=3.0))
    payload = report.to_json_dict()
    assert json.dumps(payload)
    assert payload["clean"] is False
    assert len(payload["violations"]) == 3


# --- weak composability ----------------------------------------------------


def random_pairs(names, count, seed):
    import numpy as np

    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        a, b = rng.uniform(1.0, 1e9, size=(2, len(names)))
        pairs.append((PmcVector(names, tuple(a)), PmcVector(names, tuple(b))))
    return pairs


def test_weak_composability_holds_for_sums():
    model = linear_model((1.5, 0.25, 40.0), kind=ModelKind.ZERO_INTERCEPT)
    pairs = random_pairs(model.pmc_names, 50, seed=3)
    ok, counterexamples = verify_weak_composability(model, pairs)
    assert ok
    assert counterexamples == []


def test_weak_composability_fails_under_max():
    model = linear_model((1.5,), kind=ModelKind.ZERO_INTERCEPT)
    pairs = random_pairs(model.pmc_names, 10, seed=4)
    table = OperatorTable(default=MAX)
    ok, counterexamples = verify_weak_composability(model, pairs, table)
    assert not ok
    assert len(counterexamples) == 10
    worst = counterexamples[0]
    assert worst.lhs_j != worst.rhs_j


def test_weak_composability_requires_zero_intercept():
    model = linear_model((1.0,), intercept=2.0)
    with pytest.raises(ValueError, match="zero-intercept"):
        verify_weak_composability(model, [])


def test_composability_tolerance_is_cancellation_aware():
    # enormous opposing magnitudes: the raw gap |lhs - rhs| cannot be
    # compared against lhs itself without tripping over cancellation
    model = linear_model((1e9, 1e9), kind=ModelKind.ZERO_INTERCEPT)
    a = PmcVector(("P1", "P2"), (1e11, 1.0))
    b = PmcVector(("P1", "P2"), (1e11, 1.0))
    ok, _ = verify_weak_composability(model, [(a, b)])
    assert ok


# --- strong composability --------------------------------------------------


def test_strong_check_passes_for_linear_model():
    model = linear_model((2.0, 0.5), kind=ModelKind.ZERO_INTERCEPT)
    report = strong_composability_check(model, trials=100, seed=11)
    assert report.passed
    assert report.applicable
    assert report.additive_ok
    assert report.additive_counterexamples == ()
    # two operators x two nonzero coefficients
    assert len(report.detections) == 4
    for detection in report.detections:
        assert detection.detected
        assert detection.trials_used == 1
        assert detection.witness is not None


def test_strong_check_skips_zero_coefficients():
    model = linear_model((5.0, 0.0), kind=ModelKind.ZERO_INTERCEPT)
    report = strong_composability_check(model, trials=50, seed=1)
    assert report.passed
    assert {d.pmc_index for d in report.detections} == {1}
    assert len(report.detections) == 2


def test_strong_check_vacuous_for_zero_model():
    model = linear_model((0.0, 0.0), kind=ModelKind.ZERO_INTERCEPT)
    report = strong_composability_check(model, trials=10, seed=0)
    assert not report.applicable
    assert report.detections == ()
    assert report.passed


def test_strong_check_deterministic():
    model = linear_model((1.0, 3.0), kind=ModelKind.ZERO_INTERCEPT)
    first = strong_composability_check(model, trials=20, seed=7)
    second = strong_composability_check(model, trials=20, seed=7)
    assert first == second
    other_seed = strong_composability_check(model, trials=20, seed=8)
    assert other_seed.passed


def test_strong_check_validation():
    zero_intercept = linear_model((1.0,), kind=ModelKind.ZERO_INTERCEPT)
    with pytest.raises(ValueError):
        strong_composability_check(zero_intercept, trials=0)
    with pytest.raises(ValueError):
        strong_composability_check(zero_intercept, delta=0.0)
    with pytest.raises(ValueError, match="zero-intercept"):
        strong_composability_check(linear_model((1.0,), intercept=1.0))


def test_strong_check_report_serializes():
    model = linear_model((1.0,), kind=ModelKind.ZERO_INTERCEPT)
    report = strong_composability_check(model, trials=5, seed=2)
    payload = report.to_json_dict()
    text = json.dumps(payload)
    assert '"passed": true' in text
    assert isinstance(report, ComposabilityReport)


def test_strong_check_negative_delta_detected():
    model = linear_model((4.0,), kind=ModelKind.ZERO_INTERCEPT)
    report = strong_composability_check(model, trials=50, seed=5, delta=-2.5)
    assert report.passed
    labels = {d.operator.label() for d in report.detections}
    assert labels == {"max", "sum_plus_delta(-2.5)"}


# --- synthetic cases -------------------------------------------------------


def test_generate_cases_zero_noise_reproduces_model():
    model = linear_model((2.0, 0.5), intercept=7.0)
    cases = generate_cases(model, 20, seed=3)
    assert len(cases) == 20
    low, high = COUNT_RANGE
    for vector, measured in cases:
        assert measured == predict(model, vector)
        assert all(low <= c <= high for c in vector.counts)


def test_generate_cases_deterministic_and_noisy():
    model = linear_model((2.0,), kind=ModelKind.ZERO_INTERCEPT)
    a = generate_cases(model, 5, seed=9, noise_sigma=1.0)
    b = generate_cases(model, 5, seed=9, noise_sigma=1.0)
    assert a == b
    clean = generate_cases(model, 5, seed=9)
    assert any(x[1] != y[1] for x, y in zip(a, clean))
    # noise perturbs measured energy, not the counts
    assert all(x[0] == y[0] for x, y in zip(a, clean))


def test_generate_cases_validation():
    model = linear_model((1.0,))
    with pytest.raises(ValueError):
        generate_cases(model, 0)
    with pytest.raises(ValueError):
        generate_cases(model, 3, noise_sigma=-1.0)
