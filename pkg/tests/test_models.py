"""Scoring and loss against scalar oracles, plus the SGD step algebra."""

import math

import numpy as np
import pytest

import gradcheck
from oracles import scalar_loss
from walkaug import (
    AugmentedTriplet,
    ConfigError,
    ModelConfig,
    SharingStrategy,
    Triplet,
    apply_update,
    init_state,
    loss_and_grad,
    negative_sample,
    score,
)
from walkaug.models import default_margin, score_backward


def test_score_hand_values():
    h = np.array([1.0, 2.0])
    r = np.array([0.5, -1.0])
    t = np.array([1.0, 0.0])
    assert score(h, r, t, "transe_l2") == -math.sqrt(1.25)
    assert score(h, r, t, "transe_l1") == -1.5
    assert score(h, r, t, "distmult") == 0.5


def test_score_rejects_bad_input():
    h = np.zeros(3)
    with pytest.raises(ValueError):
        score(h, np.zeros(2), h, "transe_l2")
    with pytest.raises(ValueError):
        score(h, h, h, "rotate")
    with pytest.raises(ValueError):
        score_backward(h, h, h, "rotate")


def test_distmult_symmetric_bit_for_bit():
    rng = np.random.default_rng(0)
    for _ in range(300):
        h, r, t = rng.normal(size=(3, 16))
        assert score(h, r, t, "distmult") == score(t, r, h, "distmult")


def test_transe_is_directional():
    h = np.array([1.0])
    r = np.array([1.0])
    t = np.array([2.0])
    assert score(h, r, t, "transe_l2") == 0.0
    assert score(t, r, h, "transe_l2") == -2.0


def test_score_backward_matches_finite_differences():
    from oracles import numeric_gradient

    rng = np.random.default_rng(4)
    for scoring in ("transe_l2", "transe_l1", "distmult"):
        while True:
            h, r, t = (rng.uniform(0.1, 1.0, size=6) for _ in range(3))
            if np.abs(h + r - t).min() > 0.05:  # keep |.| kinks out of reach
                break
        dh, dr, dt = score_backward(h, r, t, scoring)
        fn = lambda: score(h, r, t, scoring)
        for analytic, arr in ((dh, h), (dr, r), (dt, t)):
            np.testing.assert_allclose(analytic, numeric_gradient(fn, arr), rtol=1e-5, atol=1e-8)


def test_score_backward_zero_norm_guard():
    h = np.array([1.0, -2.0])
    r = np.array([0.5, 0.5])
    t = h + r
    dh, dr, dt = score_backward(h, r, t, "transe_l2")
    assert np.all(dh == 0) and np.all(dr == 0) and np.all(dt == 0)


def test_loss_matches_scalar_oracle():
    rng = np.random.default_rng(21)
    strategy = SharingStrategy()
    for scoring in ("transe_l2", "transe_l1", "distmult"):
        config = ModelConfig(scoring=scoring, dim=4, margin=1.5, negatives=3, seed=0)
        state = init_state(6, 2, {}, config, strategy, rng)
        positive = AugmentedTriplet(0, 1, 3, 0.7)
        negatives = [Triplet(4, 1, 3), Triplet(0, 1, 5), Triplet(2, 1, 3)]
        got, _ = loss_and_grad(positive, negatives, state, strategy, config)
        want = scalar_loss(
            positive,
            negatives,
            {i: [float(v) for v in state.entity_emb[i]] for i in range(6)},
            [float(v) for v in state.relation_emb[1]],
            scoring,
            1.5,
            0.7,
        )
        assert math.isclose(got, want, rel_tol=1e-12)


def test_loss_scales_linearly_with_weight():
    rng = np.random.default_rng(2)
    strategy = SharingStrategy()
    config = ModelConfig(scoring="transe_l2", dim=5, margin=1.0, negatives=2, seed=0)
    state = init_state(7, 2, {}, config, strategy, rng)
    negatives = [Triplet(5, 0, 2), Triplet(1, 0, 6)]
    base_loss, base_grads = loss_and_grad(
        AugmentedTriplet(1, 0, 2, 1.0), negatives, state, strategy, config
    )
    w = 2.3
    loss_w, grads_w = loss_and_grad(
        AugmentedTriplet(1, 0, 2, w), negatives, state, strategy, config
    )
    assert loss_w == w * base_loss  # identical float product
    for idx, g in base_grads.entity.items():
        np.testing.assert_allclose(grads_w.entity[idx], w * g, rtol=1e-12)
    for idx, g in base_grads.relation.items():
        np.testing.assert_allclose(grads_w.relation[idx], w * g, rtol=1e-12)


def test_zero_weight_short_circuits():
    rng = np.random.default_rng(2)
    strategy = SharingStrategy()
    config = ModelConfig(scoring="transe_l2", dim=5, negatives=1, seed=0)
    state = init_state(4, 1, {}, config, strategy, rng)
    loss, grads = loss_and_grad(
        AugmentedTriplet(0, 0, 1, 0.0), [Triplet(2, 0, 1)], state, strategy, config
    )
    assert loss == 0.0
    assert not grads.entity and not grads.relation


def test_negatives_must_share_relation():
    rng = np.random.default_rng(2)
    strategy = SharingStrategy()
    config = ModelConfig(scoring="transe_l2", dim=3, negatives=1, seed=0)
    state = init_state(4, 2, {}, config, strategy, rng)
    with pytest.raises(ValueError):
        loss_and_grad(Triplet(0, 0, 1), [Triplet(2, 1, 1)], state, strategy, config)


def test_negative_sampling_balances_sides():
    rng = np.random.default_rng(6)
    positive = Triplet(17, 2, 305)
    draws = 4000
    negatives = negative_sample(positive, 10_000, draws, rng)
    assert all(n.relation == 2 for n in negatives)
    assert all(n.head == 17 or n.tail == 305 for n in negatives)
    heads_changed = sum(n.head != positive.head for n in negatives)
    sigma = 0.5 / math.sqrt(draws)
    assert abs(heads_changed / draws - 0.5) < 3 * sigma + 1e-3


def test_negative_sampling_validates():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        negative_sample(Triplet(0, 0, 1), 5, 0, rng)
    with pytest.raises(ValueError):
        negative_sample(Triplet(0, 0, 1), 0, 2, rng)


def test_apply_update_row_algebra():
    rng = np.random.default_rng(8)
    strategy = SharingStrategy()
    config = ModelConfig(
        scoring="transe_l2", dim=3, lr=0.05, regularization=0.2, negatives=1, seed=0
    )
    state = init_state(3, 2, {}, config, strategy, rng)
    before_e = state.entity_emb.copy()
    before_r = state.relation_emb.copy()
    from walkaug.sharing import SparseGrads

    grads = SparseGrads()
    ge = np.array([1.0, -2.0, 0.5])
    gr = np.array([0.25, 0.0, -1.0])
    grads.add_entity(1, ge)
    grads.add_relation(0, gr)
    apply_update(state, grads, config)

    want_e1 = before_e[1] - 0.05 * (ge + 0.2 * before_e[1])
    want_r0 = before_r[0] - 0.05 * (gr + 0.2 * before_r[0])
    assert np.array_equal(state.entity_emb[1], want_e1)
    assert np.array_equal(state.relation_emb[0], want_r0)
    assert np.array_equal(state.entity_emb[0], before_e[0])  # untouched rows stay
    assert np.array_equal(state.entity_emb[2], before_e[2])
    assert np.array_equal(state.relation_emb[1], before_r[1])


def test_init_state_is_deterministic():
    for kind in ("none", "model", "rnn", "basis"):
        strategy = SharingStrategy(kind=kind, basis_count=2 if kind == "basis" else None)
        config = ModelConfig(scoring="transe_l2", dim=4, seed=0)
        minted = {2: (0, 1)}
        a = init_state(5, 2, minted, config, strategy, np.random.default_rng(42))
        b = init_state(5, 2, minted, config, strategy, np.random.default_rng(42))
        assert np.array_equal(a.entity_emb, b.entity_emb)
        assert np.array_equal(a.relation_emb, b.relation_emb)
        if kind == "rnn":
            assert np.array_equal(a.rnn.w_in, b.rnn.w_in)
            assert np.array_equal(a.rnn.w_rec, b.rnn.w_rec)
        if kind == "basis":
            assert np.array_equal(a.basis.vectors, b.basis.vectors)
            for key in a.basis.coefficients:
                assert np.array_equal(a.basis.coefficients[key], b.basis.coefficients[key])


def test_init_state_bound_scales_with_dimension():
    strategy = SharingStrategy()
    config = ModelConfig(scoring="transe_l2", dim=36, seed=0)
    state = init_state(200, 3, {}, config, strategy, np.random.default_rng(0))
    assert np.abs(state.entity_emb).max() <= 1.0  # 6 / sqrt(36)
    assert np.abs(state.entity_emb).max() > 0.9


def test_model_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(scoring="rotate").validate()
    with pytest.raises(ConfigError):
        ModelConfig(dim=0).validate()
    with pytest.raises(ConfigError):
        ModelConfig(negatives=0).validate()
    with pytest.raises(ConfigError):
        ModelConfig(margin=-1.0).validate()
    with pytest.raises(ConfigError):
        ModelConfig(lr=0.0).validate()
    with pytest.raises(ConfigError):
        ModelConfig(regularization=-0.1).validate()
    with pytest.raises(ConfigError):
        ModelConfig(epochs=0).validate()
    ModelConfig().validate()


def test_default_margins():
    assert default_margin("distmult") == 0.0
    assert default_margin("transe_l2") == 12.0
    assert ModelConfig(scoring="distmult").margin == 0.0
    assert ModelConfig(scoring="transe_l1").margin == 12.0
    assert ModelConfig(scoring="transe_l1", margin=3.0).margin == 3.0


def test_gradients_match_finite_differences_across_strategies():
    worst, failures = gradcheck.run_random_cases(22, seed=1)
    assert not failures, failures
    assert worst < 1e-4
