"""End-to-end acceptance checks.

Each test wraps one executable check from protomm.selftest; the checks
raise CheckFailure (an AssertionError) with a diagnostic message on
failure and CheckSkipped when their preconditions (locally available
public datasets) are not met.
"""

import pytest

from protomm import selftest


def _run(check, *args):
    try:
        detail = check(*args)
    except selftest.CheckSkipped as e:
        pytest.skip(str(e))
    assert isinstance(detail, str) and detail


def test_a1_sinkhorn_matches_transport_oracle():
    _run(selftest.check_a1)


def test_a2_loss_identities():
    _run(selftest.check_a2)


def test_a3_objective_gradients_match_finite_differences():
    _run(selftest.check_a3)


def test_a4_encoder_contract():
    _run(selftest.check_a4)


def test_a5_augmentation_invariants():
    _run(selftest.check_a5)


@pytest.mark.slow
def test_a6_directional_synthetic_benchmark():
    _run(selftest.check_a6)


def test_a7_metric_oracles():
    _run(selftest.check_a7)


def test_a8_interpretability_pipeline():
    _run(selftest.check_a8)


def test_a9_public_data_ingestion():
    _run(selftest.check_a9, None)
