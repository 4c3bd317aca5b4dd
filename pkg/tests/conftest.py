"""
Common test helpers: the model couplings used in the figures, and a
message capture fixture.
"""

import math

from unittest import mock

import pytest

from nhbp import (
    VARIANT_CHERN_X_OBC,
    VARIANT_CHERN_Y_OBC_A,
    VARIANT_CHERN_Y_OBC_B,
    VARIANT_SSH_1D,
    ModelSpec,
    add_message_handler,
    remove_message_handler,
)


@pytest.fixture
def ssh_chiral():
    """SSH chain with t2 = 1, γ = 3, Δ = 0, t1 = 1.4 (topological)."""
    return ModelSpec(VARIANT_SSH_1D, t1=1.4, t2=1.0, gamma=3.0)


@pytest.fixture
def ssh_long_range():
    """SSH chain with t2 = 1, t3 = 1/5, γ = 4/3, Δ = 0."""
    return ModelSpec(VARIANT_SSH_1D, t1=1.0, t2=1.0, t3=0.2, gamma=4 / 3)


@pytest.fixture
def ssh_hermitian():
    return ModelSpec(VARIANT_SSH_1D, t1=0.5, t2=1.0)


@pytest.fixture
def chern_solvable():
    """x-OBC Chern model with t1 = δ = Δ = 1, t3 = 0, γ = 3."""
    return ModelSpec(
        VARIANT_CHERN_X_OBC, t1=1.0, gamma=3.0, delta_onsite=1.0, delta_stagger=1.0
    )


@pytest.fixture
def chern_long_range():
    """x-OBC Chern model with t1 = δ = 2, t3 = 1/2, γ = 4/5, Δ = 1/4."""
    return ModelSpec(
        VARIANT_CHERN_X_OBC, t1=2.0, t3=0.5, gamma=0.8, delta_onsite=0.25, delta_stagger=2.0
    )


@pytest.fixture(params=[VARIANT_CHERN_Y_OBC_A, VARIANT_CHERN_Y_OBC_B])
def chern_y(request):
    """Both y-OBC Chern models at t1 = 1, δ = 1.75, γ = 2/5, Δ = 0.1."""
    return ModelSpec(request.param, t1=1.0, gamma=0.4, delta_onsite=0.1, delta_stagger=1.75)


@pytest.fixture
def gap_closing_cosines():
    """cos ky of the six OBC gap closings of the solvable Chern model."""
    return (9 / 16, math.sqrt(1 / 8), -math.sqrt(1 / 8))


@pytest.fixture
def message_handler():
    """
    A mock message handler, registered for the duration of the test.
    """
    handler = mock.Mock()
    add_message_handler(handler)
    yield handler
    remove_message_handler(handler)
