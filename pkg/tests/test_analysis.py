import csv
import io
import json
import math

import mpmath
import pytest

from spiralmaps._numbers import DPS
from spiralmaps.analysis import (
    PairSampler,
    SyntheticProfile,
    distortion_lp_norm,
    eval_map,
    holder_lower_exponent,
    lifted_rotation,
    qc_rotation_check,
    spiral_rate,
    spiral_trace,
    verify_main_1,
    verify_main_p,
    winding_number,
)
from spiralmaps.blocks import BlockParams, rotation_block_eval
from spiralmaps.construct import (
    DistortionField,
    GaugeFunction,
    RadiusSchedule,
    TargetModulus,
    build_rotation,
    build_submain_1,
    build_submain_p,
    compose_radial,
    distortion_field,
    params_submain_p,
)
from spiralmaps.exceptions import ValidationError

IDENTITY = compose_radial([])
ROT1 = compose_radial([BlockParams.on(1 / math.e, 1.0, 1.0)])


@pytest.fixture(scope="module")
def map_p2():
    return build_submain_p(TargetModulus.power(5, 2), 20)


@pytest.fixture(scope="module")
def map_beta1():
    return build_submain_1(30)


def _rot_block(alpha):
    return compose_radial([BlockParams.on(0.1, 0.1 * math.e, alpha)])


def test_eval_identity_and_origin():
    assert complex(eval_map(IDENTITY, 1 + 1j)) == pytest.approx(1 + 1j)
    assert eval_map(ROT1, 0) == 0


def test_eval_matches_block():
    w = complex(eval_map(ROT1, 1 / math.e))
    assert w == pytest.approx(rotation_block_eval(BlockParams.on(1 / math.e, 1.0, 1.0), 1 / math.e), rel=1e-14)


def test_eval_worked_example():
    blocks = params_submain_p(RadiusSchedule.from_logs([8]), TargetModulus.power(5, 2), GaugeFunction.log_power(0.25))
    radial = compose_radial(blocks)
    with mpmath.workdps(DPS):
        r1 = mpmath.exp(-8)
        w = eval_map(radial, r1)
        assert abs(abs(w) / mpmath.exp(-40) - 1) < mpmath.mpf(10) ** -40
        assert float(radial.rotation(r1)) == pytest.approx(-205.3219718914372, rel=1e-12)


def test_eval_refuses_unresolvable_phase(map_p2):
    with pytest.raises(ValidationError):
        eval_map(map_p2, map_p2.blocks[6].r)


def test_lifted_rotation_examples(map_p2):
    assert lifted_rotation(IDENTITY, 0.3) == 0
    assert float(lifted_rotation(ROT1, 1 / math.e)) == pytest.approx(-1)
    radial = build_rotation(4, GaugeFunction.log_power(0.5))
    with mpmath.workdps(DPS):
        total = sum(b.alpha for b in radial.blocks)
        assert abs(lifted_rotation(radial, radial.blocks[-1].r) + total) <= total * mpmath.mpf(10) ** -45
    with pytest.raises(ValidationError):
        lifted_rotation(ROT1, 1.5)


def test_winding_numbers():
    assert winding_number(IDENTITY, 0.5) == 0
    assert winding_number(_rot_block(4 * math.pi), 0.1) == 2
    assert winding_number(_rot_block(4 * math.pi - 0.01), 0.1) == 1
    with pytest.raises(ValidationError):
        winding_number(IDENTITY, 1.0)


def test_winding_number_for_huge_rotation(map_p2):
    n = winding_number(map_p2, map_p2.blocks[10].r)
    assert n > 10**100


def test_spiral_rate_identity():
    res = spiral_rate(IDENTITY, [0.5, 0.1, 0.01], lambda r: 1 / r)
    assert all(x == 0 for x in res.ratios)


def test_spiral_rate_l1_build(map_beta1):
    gauge = GaugeFunction.log_power(0.25)
    rate = lambda r: gauge(r) / r * mpmath.sqrt(-mpmath.log(r))
    res = spiral_rate(map_beta1, [b.r for b in map_beta1.blocks], rate)
    assert all(x >= 1 for x in res.ratios)
    assert res.limsup_estimate >= 1
    assert all(a >= b for a, b in zip(res.tail_max, res.tail_max[1:]))


def test_spiral_rate_lp_build(map_p2):
    target = TargetModulus.power(5, 2)
    gauge = GaugeFunction.default_for(target)
    rate = lambda r: r ** -0.5 * mpmath.sqrt(-map_p2.log_modulus(r)) * gauge(r)
    res = spiral_rate(map_p2, [b.r for b in map_p2.blocks], rate)
    with mpmath.workdps(DPS):
        assert all(x >= 1 - mpmath.mpf(10) ** -40 for x in res.ratios)


def test_spiral_rate_rejects_bad_input():
    with pytest.raises(ValidationError):
        spiral_rate(IDENTITY, [0.1, 0.5], lambda r: 1)
    with pytest.raises(ValidationError):
        spiral_rate(IDENTITY, [0.5, 0.1], lambda r: 0)


def test_lp_norm_examples():
    assert float(distortion_lp_norm(DistortionField(()), 2, 1)) == pytest.approx(math.pi**0.5)
    field = distortion_field(ROT1)
    expected = math.pi * (math.exp(-2) + ((math.sqrt(5) + 1) / 2) ** 2 * (1 - math.exp(-2)))
    assert float(distortion_lp_norm(field, 1, 1)) == pytest.approx(expected, rel=1e-14)
    assert float(distortion_lp_norm(field, 1, 1)) == pytest.approx(7.537, abs=1e-3)


def test_lp_norm_clips_partial_annuli():
    field = distortion_field(ROT1)
    K = (math.sqrt(5) + 1) ** 2 / 4
    B = 0.6
    expected = math.pi * (math.exp(-2) + K * (B**2 - math.exp(-2)))
    assert float(distortion_lp_norm(field, 1, B)) == pytest.approx(expected, rel=1e-14)
    assert float(distortion_lp_norm(field, 1, 0.2)) == pytest.approx(math.pi * 0.04)


def test_verify_main_p(map_p2):
    rep = verify_main_p(map_p2, 2)
    assert rep.verdict == "consistent"
    assert rep.fitted_C == max(rep.ratios)
    assert all(r >= 0 for r in rep.ratios)
    flat = compose_radial([BlockParams.on(0.1, 0.1 * math.e, 0.0, 2.0)])
    rep0 = verify_main_p(flat, 2, [0.05, 0.01])
    assert all(x == 0 for x in rep0.ratios) and rep0.verdict == "consistent"


def test_verify_main_p_negative_control():
    bad = SyntheticProfile(lambda t: mpmath.log(t), lambda t: -(t ** mpmath.mpf(-1)))
    rep = verify_main_p(bad, 2, [mpmath.exp(-k) for k in range(2, 30, 2)])
    assert rep.verdict == "violated"


def test_bound_report_monotone_sanity(map_p2):
    full = verify_main_p(map_p2, 2)
    shrunk = verify_main_p(map_p2, 2, [b.r for b in map_p2.blocks[5:]])
    assert shrunk.fitted_C <= full.fitted_C


def test_verify_main_1(map_beta1):
    rep = verify_main_1(map_beta1, variant="radius")
    assert rep.verdict == "tends to 0"
    gauge = GaugeFunction.log_power(0.25)
    with mpmath.workdps(DPS):
        for b, v in zip(map_beta1.blocks, rep.ratios):
            assert v >= gauge(b.r) * (1 - mpmath.mpf(10) ** -40)
            assert v <= gauge(b.r) * (1 + mpmath.mpf(10) ** -6)
    assert verify_main_1(map_beta1).verdict == "tends to 0"


def test_verify_main_1_identity_and_negative_control():
    rep = verify_main_1(compose_radial([BlockParams.on(0.1, 0.1 * math.e, 0.0, 2.0)]), [0.05, 0.01, 0.001])
    assert all(x == 0 for x in rep.ratios)
    c = mpmath.mpf(3)
    synthetic = SyntheticProfile(lambda t: mpmath.log(t), lambda t: -c * mpmath.sqrt(-mpmath.log(t)) / t)
    rep = verify_main_1(synthetic, [mpmath.exp(-k) for k in range(2, 40, 3)])
    assert rep.verdict == "does not vanish"
    assert all(abs(x - c) < mpmath.mpf(10) ** -40 for x in rep.ratios)


def test_verify_needs_modulus_below_one():
    with pytest.raises(ValidationError):
        verify_main_p(SyntheticProfile(lambda t: mpmath.mpf(0), lambda t: 0), 2, [0.5])
    with pytest.raises(ValidationError):
        verify_main_p(IDENTITY, 1, [0.5])


def test_holder_identity():
    stat = holder_lower_exponent(IDENTITY, PairSampler(n_pairs=300))
    assert stat.statistic == pytest.approx(1, abs=1e-9)
    assert stat.consistent_with(1.0 + 1e-9)


def test_holder_is_deterministic(map_beta1):
    a = holder_lower_exponent(map_beta1, PairSampler(n_pairs=200, seed=4))
    b = holder_lower_exponent(map_beta1, PairSampler(n_pairs=200, seed=4))
    assert a == b


def test_holder_slack_from_constant():
    stat = holder_lower_exponent(IDENTITY, PairSampler(n_pairs=50, constant=0.5))
    assert stat.slack == pytest.approx(math.log(2) / math.log(1 / stat.smallest_distance))


def test_holder_rejects_bad_sampler():
    with pytest.raises(ValidationError):
        PairSampler(d_min=1e-2, d_max=1e-6)


@pytest.mark.parametrize("alpha", [0.5, 1, 2, 5, 1e-6])
def test_qc_check(alpha):
    rec = qc_rotation_check(alpha)
    assert rec.holds
    assert float(rec.bound_coefficient) == pytest.approx(alpha * math.sqrt(4 + alpha**2) / 2, rel=1e-12)


def test_qc_examples():
    assert float(qc_rotation_check(1).bound_coefficient) == pytest.approx(1.1180, abs=1e-4)
    five = qc_rotation_check(5)
    assert float(five.bound_coefficient) == pytest.approx(13.463, abs=1e-3)
    assert float(five.K) == pytest.approx(26.963, abs=1e-3)
    tiny = qc_rotation_check(1e-8)
    assert float(tiny.bound_coefficient / tiny.alpha) == pytest.approx(1, rel=1e-12)


@pytest.mark.parametrize(
    "radial",
    [
        build_submain_1(1),
        compose_radial(
            [
                BlockParams.on(0.5, 0.9, 40.0, 2.0),
                BlockParams.on(0.05, 0.2, 300.0, 1.5),
                BlockParams.on(1e-4, 1e-3, 900.0, 3.0),
            ]
        ),
    ],
)
def test_lifted_rotation_continuous_on_grid(radial):
    trace = spiral_trace(radial, 1e-5, 1, 10_000)
    taus = [float(x) for x in trace.rotation]
    assert max(abs(b - a) for a, b in zip(taus, taus[1:])) < math.pi
    assert taus[-1] == pytest.approx(
        -sum(float(b.alpha * mpmath.log(b.R / b.r)) for b in radial.blocks), rel=1e-12
    )


def test_min_modulus_identity():
    radial = compose_radial([BlockParams.on(0.1, 0.1 * math.e, 6.0, 2.5)])
    for t in (0.05, 0.15, 0.2, 0.5):
        mins = min(abs(eval_map(radial, t * mpmath.expj(2 * mpmath.pi * k / 360))) for k in range(360))
        assert abs(mins - radial.modulus(t)) <= 1e-12 * radial.modulus(t)


def test_rotation_floor_lp_build(map_p2):
    gauge = GaugeFunction.default_for(TargetModulus.power(5, 2))
    with mpmath.workdps(DPS):
        for b in map_p2.blocks:
            floor = b.r ** -0.5 * mpmath.sqrt(-map_p2.log_modulus(b.r)) * gauge(b.r)
            assert abs(map_p2.rotation(b.r)) >= floor * (1 - mpmath.mpf(10) ** -40)


def test_trace_csv(map_p2):
    trace = spiral_trace(map_p2, 1e-30, 1, 50)
    text = trace.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "modulus", "rotation", "distortion"]
    ts = [float(r[0]) for r in rows[1:]]
    assert all(b < a for a, b in zip(ts, ts[1:]))
    assert float(rows[1][2]) == 0.0
    with pytest.raises(ValidationError):
        spiral_trace(map_p2, 1, 0.5)


def test_bound_report_json(map_p2):
    data = json.loads(verify_main_p(map_p2, 2).to_json())
    assert set(data) >= {"radii", "ratios", "fitted_C", "verdict", "depth"}
    assert data["depth"] == 20 and len(data["radii"]) == 20
