import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spiralmaps.blocks import (
    Annulus,
    BlockParams,
    annulus_distortion,
    block_differential_norm,
    block_distortion,
    block_jacobian,
    fd_oracle,
    rotation_block_eval,
    stretch_block_eval,
)
from spiralmaps.exceptions import ValidationError

UNIT = BlockParams.on(1 / math.e, 1.0, 1.0)


def test_rotation_identity_outside():
    assert rotation_block_eval(UNIT, 2) == 2


def test_rotation_inner_circle():
    w = rotation_block_eval(UNIT, 1 / math.e)
    assert w == pytest.approx(complex(0.19877, -0.30956), abs=1e-5)
    assert w == pytest.approx(np.exp(-1) * np.exp(-1j))


def test_zero_rotation_is_identity():
    block = BlockParams.on(1 / math.e, 1.0, 0.0)
    assert rotation_block_eval(block, 0.5 + 0.1j) == 0.5 + 0.1j


def test_zero_maps_to_zero():
    assert stretch_block_eval(BlockParams.on(0.1, 0.3, 2.0, 3.0), 0) == 0


def test_rotation_block_rejects_stretch():
    with pytest.raises(ValidationError):
        rotation_block_eval(BlockParams.on(0.1, 0.3, 1.0, 2.0), 0.2)


def test_non_finite_point_rejected():
    with pytest.raises(ValidationError):
        stretch_block_eval(UNIT, complex(math.nan, 0))


@pytest.mark.parametrize("r, R", [(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)])
def test_bad_annulus(r, R):
    with pytest.raises(ValidationError):
        Annulus(r, R)


def test_q_below_one_rejected():
    with pytest.raises(ValidationError):
        BlockParams.on(0.1, 0.3, 1.0, 0.5)


def test_stretch_inner_value():
    block = BlockParams.on(1 / math.e, 1.0, 0.0, 2.0)
    w = stretch_block_eval(block, 1 / math.e)
    assert w == pytest.approx(math.exp(-2), rel=1e-15)
    assert w.imag == 0


def test_stretch_outside_identity():
    block = BlockParams.on(0.1, 0.3, 7.0, 4.0)
    z = 0.6 * np.exp(1j * np.linspace(0, 6, 50))
    assert np.array_equal(stretch_block_eval(block, z), z)


def test_differential_cases():
    assert block_differential_norm(UNIT, 3.0) == 1.0
    assert block_differential_norm(UNIT, 0.6) == pytest.approx((math.sqrt(5) + 1) / 2)
    stretch = BlockParams.on(1 / math.e, 1.0, 0.0, 2.0)
    assert block_differential_norm(stretch, 0.1) == pytest.approx(math.exp(-1))


def test_jacobian_cases():
    assert block_jacobian(UNIT, 0.2) == 1.0
    stretch = BlockParams.on(1 / math.e, 1.0, 3.0, 2.0)
    assert block_jacobian(stretch, 1.0) == pytest.approx(2.0)
    assert block_jacobian(stretch, 0.1) == pytest.approx(math.exp(-2))


def test_distortion_cases():
    assert block_distortion(BlockParams.on(0.2, 0.5, 0.0), 0.3) == pytest.approx(1.0)
    assert block_distortion(UNIT, 0.5) == pytest.approx(((math.sqrt(5) + 1) / 2) ** 2)
    k = block_distortion(BlockParams.on(0.2, 0.5, 10.0, 3.0), 0.3)
    assert k == pytest.approx(36.64, abs=0.01)
    assert k <= 4 * 100 / 3
    assert block_distortion(UNIT, 0.1) == 1.0


def test_differential_at_origin_rejected():
    with pytest.raises(ValidationError):
        block_jacobian(UNIT, 0)


def test_boundary_takes_annulus_branch():
    block = BlockParams.on(0.25, 0.5, 3.0, 2.0)
    assert block_distortion(block, 0.5) == pytest.approx(annulus_distortion(3.0, 2.0))
    assert block_distortion(block, 0.25) == pytest.approx(annulus_distortion(3.0, 2.0))


def test_oracle_identity():
    s = fd_oracle(lambda z: z, 0.3 + 0.2j)
    assert s.op_norm == pytest.approx(1, abs=1e-8)
    assert s.jacobian == pytest.approx(1, abs=1e-8)
    assert s.distortion == pytest.approx(1, abs=1e-8)


def test_oracle_matches_rotation_block():
    z = 0.6 * np.exp(0.4j)
    s = fd_oracle(lambda w: stretch_block_eval(UNIT, w), z, breakpoints=(UNIT.r, UNIT.R))
    assert s.distortion == pytest.approx(block_distortion(UNIT, z), rel=1e-5)


def test_oracle_matches_stretch_block():
    block = BlockParams.on(0.2, 0.2 * math.e, 3.0, 2.0)
    z = 0.33 * np.exp(2.1j)
    s = fd_oracle(lambda w: stretch_block_eval(block, w), z, breakpoints=(block.r, block.R))
    assert s.op_norm == pytest.approx(block_differential_norm(block, z), rel=1e-5)
    assert s.jacobian == pytest.approx(block_jacobian(block, z), rel=1e-5)
    assert s.distortion == pytest.approx(block_distortion(block, z), rel=1e-5)


def test_oracle_flags_degenerate():
    s = fd_oracle(lambda z: z.real, 0.5 + 0.5j)
    assert s.degenerate and math.isinf(s.distortion)


def test_oracle_rejects_bad_step_and_breakpoint():
    with pytest.raises(ValidationError):
        fd_oracle(lambda z: z, 0.5, rel_step=0.1)
    with pytest.raises(ValidationError):
        fd_oracle(lambda z: z, 0.5, breakpoints=(0.5 + 1e-7,))


def test_circle_preservation():
    rng = np.random.default_rng(1)
    t = rng.uniform(0.01, 2.0, 1000)
    z = t * np.exp(1j * rng.uniform(0, 2 * np.pi, 1000))
    block = BlockParams.on(0.3, 0.3 * math.e, 17.0)
    assert np.max(np.abs(np.abs(rotation_block_eval(block, z)) - t)) <= 1e-12


def test_q_one_stretch_equals_rotation():
    rng = np.random.default_rng(2)
    z = rng.uniform(-1, 1, 1000) + 1j * rng.uniform(-1, 1, 1000)
    block = BlockParams.on(0.2, 0.2 * math.e, 5.5)
    a, b = stretch_block_eval(block, z), rotation_block_eval(block, z)
    assert np.max(np.abs(a - b) / np.abs(a)) <= 1e-15


def test_continuity_across_breakpoints():
    block = BlockParams.on(0.2, 0.2 * math.e, 9.0, 3.0)
    for radius in (block.r, block.R):
        gaps = []
        for delta in (1e-4, 1e-5, 1e-6):
            gaps.append(abs(stretch_block_eval(block, radius + delta) - stretch_block_eval(block, radius - delta)))
        # O(delta) with a bounded constant: shrinking delta tenfold shrinks the jump about tenfold
        assert gaps[1] / gaps[0] == pytest.approx(0.1, rel=0.05)
        assert gaps[2] / gaps[1] == pytest.approx(0.1, rel=0.05)


@settings(max_examples=60, deadline=None)
@given(
    alpha=st.floats(-30, 30),
    q=st.floats(1, 20),
    u=st.floats(0.01, 0.99),
    theta=st.floats(0, 2 * math.pi),
)
def test_norm_squared_equals_distortion_times_jacobian(alpha, q, u, theta):
    block = BlockParams.on(0.1, 0.1 * math.e, alpha, q)
    z = 0.1 * math.exp(u) * np.exp(1j * theta)
    lhs = block_differential_norm(block, z) ** 2
    rhs = block_distortion(block, z) * block_jacobian(block, z)
    assert lhs == pytest.approx(rhs, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0, 50), q=st.floats(1, 50))
def test_distortion_bound_when_stretch_below_rotation(alpha, q):
    k = annulus_distortion(alpha, q)
    assert k >= 1 - 1e-12
    if 2 <= q + 1 <= alpha:
        assert k <= 4 * alpha**2 / q * (1 + 1e-12)
