import math

import numpy as np
import pytest

from prefalign.losses import (
    DomainError,
    Family,
    LogProbPair,
    LossParams,
    asft_align_loss,
    asft_align_plane,
    asft_total_loss,
    bt_loss_plane,
    bt_pair_loss,
    bt_preference_prob,
    dpo_loss,
    ipo_loss,
    log_odds,
    logsigmoid,
    loss_value,
    orpo_loss,
    sft_nll_loss,
    sigmoid,
)

LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# logsigmoid
# ---------------------------------------------------------------------------


def test_logsigmoid_at_zero():
    assert logsigmoid(0.0) == pytest.approx(-LN2, abs=1e-15)


def test_logsigmoid_negative_asymptote():
    assert abs(logsigmoid(-50.0) - (-50.0)) < 1e-9


def test_logsigmoid_frozen_value():
    # high-precision oracle: -log(1 + e^-3)
    assert logsigmoid(3.0) == pytest.approx(-0.04858735157374206, abs=1e-12)


def test_logsigmoid_monotone_and_nonpositive():
    zs = np.linspace(-40.0, 40.0, 401)
    vals = [logsigmoid(float(z)) for z in zs]
    assert all(v <= 0.0 for v in vals)
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_logsigmoid_rejects_nonfinite():
    for bad in (math.inf, -math.inf, math.nan):
        with pytest.raises(DomainError):
            logsigmoid(bad)


# ---------------------------------------------------------------------------
# log-odds transform
# ---------------------------------------------------------------------------


def test_log_odds_midpoint():
    assert log_odds(math.log(0.5)) == 0.0


def test_log_odds_hand_value():
    assert log_odds(math.log(0.75)) == pytest.approx(math.log(3.0), abs=1e-12)


def test_log_odds_tiny_probability():
    assert abs(log_odds(-50.0) - (-50.0)) < 1e-9


def test_log_odds_rejects_certainty():
    with pytest.raises(DomainError):
        log_odds(0.0)
    with pytest.raises(DomainError):
        log_odds(1e-320)  # positive logp


def test_log_odds_clamp_allows_boundary():
    v = log_odds(0.0, clamp=True)
    assert math.isfinite(v) and v > 0


def test_log_odds_stable_matches_naive():
    for p in np.linspace(1e-6, 1.0 - 1e-6, 500):
        naive = math.log(p / (1.0 - p))
        assert abs(log_odds(math.log(p)) - naive) < 1e-9


def test_log_odds_finite_deep_underflow():
    v = log_odds(-700.0)
    assert math.isfinite(v)
    assert v == pytest.approx(-700.0, abs=1e-9)


def test_score_identity():
    # sigmoid(log(p/(1-p))) recovers p across the full probability range
    rng = np.random.default_rng(0)
    ps = np.concatenate([[1e-12, 1.0 - 1e-12], rng.uniform(1e-12, 1.0 - 1e-12, 9998)])
    for p in ps:
        assert abs(sigmoid(log_odds(math.log(p))) - p) < 1e-10


# ---------------------------------------------------------------------------
# alignment loss
# ---------------------------------------------------------------------------


def test_align_loss_symmetric_midpoint():
    pair = LogProbPair(math.log(0.5), math.log(0.5))
    assert asft_align_loss(pair) == pytest.approx(2 * LN2, abs=1e-12)


def test_align_loss_hand_value():
    # oracle via the plane form: -log(0.9) - log(1 - 0.1)
    pair = LogProbPair(math.log(0.9), math.log(0.1))
    assert asft_align_loss(pair) == pytest.approx(0.21072103131565256, abs=1e-12)


def test_align_loss_perfect_separation():
    pair = LogProbPair(math.log(0.999999), math.log(1e-9))
    assert 0.0 <= asft_align_loss(pair) < 1e-5


def test_align_loss_equals_plane_form():
    grid = np.linspace(1e-6, 1.0 - 1e-6, 40)
    for x1 in grid:
        for x2 in grid:
            pair_form = asft_align_loss(LogProbPair(math.log(x1), math.log(x2)))
            assert abs(pair_form - asft_align_plane(x1, x2)) < 1e-9


def test_align_loss_nonnegative():
    rng = np.random.default_rng(1)
    for _ in range(200):
        pair = LogProbPair(math.log(rng.uniform(1e-6, 1 - 1e-6)), math.log(rng.uniform(1e-6, 1 - 1e-6)))
        assert asft_align_loss(pair) >= 0.0


# ---------------------------------------------------------------------------
# SFT and total losses
# ---------------------------------------------------------------------------


def test_sft_nll_values():
    assert sft_nll_loss(math.log(0.5)) == pytest.approx(LN2, abs=1e-12)
    assert sft_nll_loss(0.0) == 0.0
    assert sft_nll_loss(math.log(0.25)) == pytest.approx(1.3862943611198906, abs=1e-12)


def test_total_loss_beta_zero_is_pure_sft():
    pair = LogProbPair(math.log(0.5), math.log(0.5))
    params = LossParams(family=Family.ASFT, beta=0.0)
    assert asft_total_loss(pair, params) == pytest.approx(LN2, abs=1e-12)


def test_total_loss_frozen_value():
    pair = LogProbPair(math.log(0.5), math.log(0.5))
    params = LossParams(family=Family.ASFT, beta=0.1)
    assert asft_total_loss(pair, params) == pytest.approx(0.8317766166719343, abs=1e-12)


def test_total_loss_boundary_rejected():
    pair = LogProbPair(0.0, math.log(0.5))
    with pytest.raises(DomainError):
        asft_total_loss(pair, LossParams(family=Family.ASFT, beta=0.1))


def test_total_loss_affine_in_beta():
    pair = LogProbPair(math.log(0.3), math.log(0.2))
    align = asft_align_loss(pair)
    l1 = asft_total_loss(pair, LossParams(beta=0.25))
    l2 = asft_total_loss(pair, LossParams(beta=0.75))
    assert (l2 - l1) / 0.5 == pytest.approx(align, abs=1e-12)


# ---------------------------------------------------------------------------
# pairwise-comparison losses
# ---------------------------------------------------------------------------


def test_bt_plane_symmetry():
    for x in (0.1, 0.5, 0.9):
        for beta in (0.1, 1.0, 3.0):
            assert bt_loss_plane(x, x, beta) == pytest.approx(LN2, abs=1e-12)


def test_bt_plane_hand_value():
    assert bt_loss_plane(0.75, 0.25, 1.0) == pytest.approx(0.2876820724517809, abs=1e-12)


def test_bt_plane_monotone_directions():
    base = bt_loss_plane(0.5, 0.5, 1.0)
    assert bt_loss_plane(0.6, 0.5, 1.0) < base
    assert bt_loss_plane(0.5, 0.6, 1.0) > base
    assert bt_loss_plane(0.3, 0.2, 0.5) > 0.0


def test_bt_plane_boundary_rejected():
    for x1, x2 in ((0.0, 0.5), (0.5, 1.0), (1.0, 0.5)):
        with pytest.raises(ValueError):
            bt_loss_plane(x1, x2, 1.0)


def test_bt_preference_prob():
    assert bt_preference_prob(3.0, 3.0) == 0.5
    assert bt_preference_prob(1.0, 0.0) == pytest.approx(0.7310585786300049, abs=1e-12)
    assert bt_preference_prob(0.0, 100.0) < 1e-20


def test_bt_preference_complementarity():
    rng = np.random.default_rng(2)
    for _ in range(500):
        a, b = rng.normal(scale=20.0, size=2)
        assert abs(bt_preference_prob(a, b) + bt_preference_prob(b, a) - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# DPO / IPO / ORPO
# ---------------------------------------------------------------------------


def test_dpo_policy_equals_reference():
    pair = LogProbPair(-1.5, -2.5, -1.5, -2.5)
    assert dpo_loss(pair, LossParams(family=Family.DPO, alpha=0.7)) == pytest.approx(LN2, abs=1e-12)


def test_dpo_frozen_value():
    # logp_w - ref_w = 1, logp_l - ref_l = -1, alpha = 1 -> -log sigmoid(2)
    pair = LogProbPair(-1.0, -1.0, -2.0, 0.0)
    params = LossParams(family=Family.DPO, alpha=1.0)
    assert dpo_loss(pair, params) == pytest.approx(0.12692801104297249, abs=1e-12)


def test_dpo_zero_temperature():
    pair = LogProbPair(-0.3, -9.0, -5.0, -0.1)
    assert dpo_loss(pair, LossParams(family=Family.DPO, alpha=0.0)) == pytest.approx(LN2, abs=1e-12)


def test_dpo_requires_reference():
    with pytest.raises(ValueError, match="reference"):
        dpo_loss(LogProbPair(-1.0, -2.0), LossParams(family=Family.DPO))


def test_ipo_values():
    params = LossParams(family=Family.IPO, tau=0.1)
    # gap h exactly 1/(2 tau) = 5
    on_target = LogProbPair(-1.0, -6.0, -1.0, -1.0)
    assert ipo_loss(on_target, params) == pytest.approx(0.0, abs=1e-12)
    h_zero = LogProbPair(-1.0, -1.0, -1.0, -1.0)
    assert ipo_loss(h_zero, params) == pytest.approx(25.0, abs=1e-12)
    h_ten = LogProbPair(-1.0, -11.0, -1.0, -1.0)  # h = 10, symmetric about the target
    assert ipo_loss(h_ten, params) == pytest.approx(25.0, abs=1e-12)


def test_ipo_requires_reference():
    with pytest.raises(ValueError, match="reference"):
        ipo_loss(LogProbPair(-1.0, -2.0), LossParams(family=Family.IPO))


def test_orpo_equal_logps():
    pair = LogProbPair(math.log(0.5), math.log(0.5))
    params = LossParams(family=Family.ORPO, lam=0.1)
    assert orpo_loss(pair, params) == pytest.approx(0.7624618986159398, abs=1e-12)


def test_orpo_lambda_zero_is_pure_sft():
    pair = LogProbPair(math.log(0.37), math.log(0.11))
    params = LossParams(family=Family.ORPO, lam=0.0)
    assert orpo_loss(pair, params) == pytest.approx(sft_nll_loss(pair.logp_w), abs=1e-15)


def test_orpo_frozen_value():
    # odds ratio (0.9/0.1) / (0.1/0.9) = 81: 0.105361 + 0.1 * (-log sigmoid(log 81))
    pair = LogProbPair(math.log(0.9), math.log(0.1))
    params = LossParams(family=Family.ORPO, lam=0.1)
    assert orpo_loss(pair, params) == pytest.approx(0.10658752491700774, abs=1e-10)


def test_orpo_domain_error_propagates():
    with pytest.raises(DomainError):
        orpo_loss(LogProbPair(0.0, math.log(0.5)), LossParams(family=Family.ORPO))


# ---------------------------------------------------------------------------
# dispatcher and shared properties
# ---------------------------------------------------------------------------


def _all_family_params():
    return [
        LossParams(family=Family.SFT),
        LossParams(family=Family.ASFT),
        LossParams(family=Family.BT),
        LossParams(family=Family.DPO),
        LossParams(family=Family.IPO),
        LossParams(family=Family.ORPO),
    ]


def test_every_family_monotone_in_logps():
    # non-increasing in logp_w, non-decreasing in logp_l, pointwise on a seeded grid
    rng = np.random.default_rng(3)
    eps = 1e-3
    for params in _all_family_params():
        for _ in range(100):
            lw = math.log(rng.uniform(0.05, 0.9))
            ll = math.log(rng.uniform(0.05, 0.9))
            rw = math.log(rng.uniform(0.05, 0.9))
            rl = math.log(rng.uniform(0.05, 0.9))
            base = loss_value(LogProbPair(lw, ll, rw, rl), params)
            up_w = loss_value(LogProbPair(lw + eps, ll, rw, rl), params)
            up_l = loss_value(LogProbPair(lw, ll + eps, rw, rl), params)
            assert up_w <= base + 1e-12, params.family
            assert up_l >= base - 1e-12, params.family


def test_dispatcher_covers_every_family():
    pair = LogProbPair(-1.0, -2.0, -1.5, -1.5)
    for params in _all_family_params():
        assert math.isfinite(loss_value(pair, params))


def test_bt_pair_loss_matches_plane_form():
    params = LossParams(family=Family.BT, beta=0.3)
    pair = LogProbPair(math.log(0.4), math.log(0.2))
    assert bt_pair_loss(pair, params) == pytest.approx(bt_loss_plane(0.4, 0.2, 0.3), abs=1e-12)


# ---------------------------------------------------------------------------
# parameter and pair validation
# ---------------------------------------------------------------------------


def test_params_defaults():
    params = LossParams()
    assert params.beta == 0.1
    assert params.alpha == 0.1
    assert params.lam == 0.1
    assert params.tau == 0.1
    assert params.logprob_aggregation == "sum"


def test_params_reject_invalid():
    with pytest.raises(ValueError):
        LossParams(beta=-0.1)
    with pytest.raises(ValueError):
        LossParams(alpha=math.nan)
    with pytest.raises(ValueError):
        LossParams(tau=0.0)
    with pytest.raises(ValueError):
        LossParams(logprob_aggregation="median")


def test_pair_rejects_invalid():
    with pytest.raises(ValueError):
        LogProbPair(0.1, -1.0)
    with pytest.raises(ValueError):
        LogProbPair(-1.0, math.inf)
    with pytest.raises(ValueError):
        LogProbPair(-1.0, -1.0, ref_logp_w=0.5, ref_logp_l=-1.0)
