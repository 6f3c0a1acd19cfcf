import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pingpong_qkd.adversary import (
    InterceptResend,
    LossHiding,
    NoAttack,
    TrojanHorse,
    assess,
    baseline_double_click_rate,
    baseline_flag_rate,
    intercept_resend,
    loss_hiding_feasible,
    mutual_information,
    one_click_check,
    travel_trace_distance,
    trojan_horse,
)
from pingpong_qkd.protocol import ControlVerdict, ProtocolConfig, control_runs, with_overrides
from pingpong_qkd.quantum_state import BellSign, apply_pockels, bell_state, mix_colored

IDEAL = with_overrides(ProtocolConfig(), **{"source.eta1": 1.0, "source.eta2": 1.0, "source.double_pair_ratio": 0.0})


def test_mutual_information_oracles():
    assert mutual_information([0, 1] * 50, [0, 1] * 50) == pytest.approx(1.0)
    assert mutual_information([0, 1] * 50, [0, 0, 1, 1] * 25) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        mutual_information([], [])


@pytest.mark.parametrize("m", [0.0, 0.07, 1.0])
def test_travel_photon_carries_no_information(m):
    assert travel_trace_distance(mix_colored(bell_state(BellSign.PLUS), m)) == pytest.approx(0.0, abs=1e-15)


def test_intercept_resend_z_basis():
    rep = intercept_resend("z", IDEAL, n_runs=10_000)
    assert rep.info_per_message_bit == pytest.approx(0.0, abs=0.01)
    assert rep.detection_prob_per_control_run == pytest.approx(0.0, abs=1e-12)


def test_intercept_resend_x_basis():
    rep = intercept_resend("x", IDEAL, n_runs=10_000)
    assert rep.info_per_message_bit == pytest.approx(0.0, abs=0.01)
    assert rep.detection_prob_per_control_run == pytest.approx(0.5, abs=0.01)


def test_intercept_channel_by_hand():
    rho = InterceptResend("x").travel_channel(bell_state(BellSign.PLUS)).rho
    # result is (|++><++| + |--><--|)/2
    plus = np.array([1, 1]) / math.sqrt(2)
    minus = np.array([1, -1]) / math.sqrt(2)
    expected = sum(0.5 * np.outer(np.kron(v, v), np.kron(v, v)) for v in (plus, minus))
    np.testing.assert_allclose(rho, expected, atol=1e-15)
    np.testing.assert_allclose(np.diag(rho).real, [0.25] * 4, atol=1e-15)


def test_intercept_rejects_unknown_basis():
    with pytest.raises(ValueError):
        InterceptResend("y")


def test_no_attack_report_is_zero():
    rep = assess(NoAttack(), ProtocolConfig())
    assert rep.info_per_message_bit == 0
    assert rep.detection_prob_per_control_run == 0
    assert rep.double_click_excess == 0


def _pockels_readout_oracle():
    # x probe through the cell: identity keeps |+>, the pi phase turns it into |->
    plus = np.array([1, 1]) / math.sqrt(2)
    out = {bit: np.diag([1, -1 if bit else 1]) @ plus for bit in (0, 1)}
    return {bit: abs(plus @ v) ** 2 for bit, v in out.items()}


def test_trojan_full_pass_reads_every_bit():
    oracle = _pockels_readout_oracle()
    assert oracle == {0: pytest.approx(1.0), 1: pytest.approx(0.0)}
    rep = trojan_horse(TrojanHorse(1.0), IDEAL, n_runs=5000, n_control_runs=100)
    assert rep.info_per_message_bit == pytest.approx(1.0, abs=1e-3)


def test_trojan_filtered_out():
    rep = trojan_horse(TrojanHorse(0.0), IDEAL, n_runs=5000, n_control_runs=100)
    assert rep.info_per_message_bit == 0.0


def test_trojan_double_photons_raise_double_clicks():
    rep = trojan_horse(TrojanHorse(1.0, 2), ProtocolConfig(), n_runs=1000, n_control_runs=100_000)
    assert rep.double_click_excess > 0
    assert rep.double_click_zscore > 5


def test_trojan_validation():
    with pytest.raises(ValueError):
        TrojanHorse(1.5)
    with pytest.raises(ValueError):
        TrojanHorse(1.0, 0)


def test_pockels_cell_matches_trojan_readout_on_states():
    # the same phase that encodes the bit is what the probe reads
    assert apply_pockels(bell_state(BellSign.PLUS), True).allclose(bell_state(BellSign.MINUS))


# ---- one-click check


def test_one_click_baseline_ideal_zero():
    assert baseline_flag_rate(IDEAL) == 0.0
    verdict = one_click_check(control_runs(IDEAL, None, 2000), IDEAL)
    assert verdict.flagged == 0 and not verdict.alarm


def test_one_click_baseline_lossy_arithmetic():
    cfg = ProtocolConfig()
    e = 0.41
    w1, w2 = 1 / 1.04, 0.04 / 1.04
    expected = 1 - (w1 * e * e + w2 * (2 * e * (1 - e)) ** 2)
    assert baseline_flag_rate(cfg) == pytest.approx(expected)
    assert baseline_double_click_rate(cfg) == pytest.approx(w2 * (1 - (1 - e * e) ** 2))
    verdict = one_click_check(control_runs(cfg, None, 10_000), cfg)
    assert verdict.flag_rate > 0.5
    assert verdict.flag_rate == pytest.approx(expected, abs=4 * math.sqrt(expected * (1 - expected) / 10_000))
    assert not verdict.alarm


def test_one_click_flag_rate_alarm_on_trojan_pairs():
    verdict = one_click_check(control_runs(IDEAL, TrojanHorse(1.0, 2), 10_000), IDEAL)
    assert verdict.flag_rate > verdict.baseline + 5 * math.sqrt(max(verdict.baseline, 1e-12) / 10_000)
    assert verdict.zscore > 5 and verdict.alarm


def test_one_click_double_click_alarm_with_lossy_detectors():
    cfg = ProtocolConfig()
    verdict = one_click_check(control_runs(cfg, TrojanHorse(1.0, 2), 10_000), cfg)
    # probe photons fill missing clicks as often as they add extra ones
    assert abs(verdict.zscore) < 5
    assert verdict.double_zscore > 5
    assert verdict.alarm


def test_one_click_needs_records():
    with pytest.raises(ValueError):
        one_click_check([], ProtocolConfig())


# ---- loss hiding


@pytest.mark.parametrize(
    "t, feasible, margin", [(0.5, True, 0.1), (1.0, False, -0.4), (0.6, False, 0.0), (0.0, True, 0.6)]
)
def test_loss_hiding_threshold(t, feasible, margin):
    verdict = loss_hiding_feasible(t)
    assert verdict.feasible is feasible
    assert verdict.margin == pytest.approx(margin, abs=1e-15)


@given(st.floats(0, 1))
def test_loss_hiding_margin_sign_matches_feasibility(t):
    v = loss_hiding_feasible(t)
    assert v.feasible == (v.margin > 0)


def test_loss_hiding_rejects_out_of_range():
    with pytest.raises(ValueError):
        loss_hiding_feasible(1.2)


def test_loss_hiding_attack_adds_missing_clicks():
    cfg = IDEAL
    rep = assess(LossHiding(0.5), cfg, n_runs=4000)
    assert rep.info_per_message_bit == 0
    records = control_runs(cfg, LossHiding(0.5), 4000)
    flagged = sum(r.verdict is ControlVerdict.MULTI_CLICK for r in records) / 4000
    assert flagged == pytest.approx(0.5, abs=0.03)


def test_report_fields_present():
    rep = assess(InterceptResend("x"), ProtocolConfig(), n_runs=500)
    d = rep.to_dict()
    assert {"info_per_message_bit", "detection_prob_per_control_run", "double_click_excess"} <= set(d)


@given(st.floats(0, 1), st.floats(0, 1))
def test_loss_hiding_margin_monotone(a, b):
    lo, hi = sorted((a, b))
    assert loss_hiding_feasible(lo).margin >= loss_hiding_feasible(hi).margin


def test_control_records_reproducible_under_seed():
    cfg = ProtocolConfig(seed=77)
    assert control_runs(cfg, None, 500) == control_runs(cfg, None, 500)
    assert control_runs(cfg, None, 500) != control_runs(ProtocolConfig(seed=78), None, 500)
