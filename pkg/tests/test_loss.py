import numpy as np
import pytest

from p3o import autodiff as ad
from p3o.loss import (
    LossBreakdown,
    PenaltyConfig,
    clip_fraction,
    cost_surrogate,
    mean_kl,
    p3o_objective,
    reward_surrogate,
    update_kappa,
)
from p3o.nn import CategoricalHead, GaussianHead


def ratios_node(values):
    return ad.leaf(np.asarray(values, dtype=np.float64))


# ------------------------------------------------------------ reward surrogate


def test_reward_surrogate_ratio_one():
    out = reward_surrogate(ratios_node([1.0]), np.array([2.0]), eps=0.2)
    assert float(out.data) == pytest.approx(-2.0)


def test_reward_surrogate_clips_high_ratio():
    out = reward_surrogate(ratios_node([1.5]), np.array([1.0]), eps=0.2)
    assert float(out.data) == pytest.approx(-1.2)


def test_reward_surrogate_pessimistic_for_negative_advantage():
    out = reward_surrogate(ratios_node([0.5]), np.array([-1.0]), eps=0.2)
    assert float(out.data) == pytest.approx(0.8)


def test_reward_surrogate_empty_batch_errors():
    with pytest.raises(ValueError, match="empty"):
        reward_surrogate(ratios_node([]), np.array([]), eps=0.2)


def test_large_eps_reduces_to_importance_weighted_objective():
    rng = np.random.default_rng(0)
    r = 1.0 + rng.uniform(-0.3, 0.3, size=64)
    adv = rng.standard_normal(64)
    out = reward_surrogate(ratios_node(r), adv, eps=0.9)
    assert float(out.data) == pytest.approx(-np.mean(r * adv), abs=1e-15)


def test_clip_region_degeneracy_inside_band_positive_adv():
    rng = np.random.default_rng(1)
    r = 1.0 + rng.uniform(-0.19, 0.19, size=32)
    adv = rng.uniform(0.1, 2.0, size=32)
    out = reward_surrogate(ratios_node(r), adv, eps=0.2)
    assert float(out.data) == -np.mean(r * adv)


# ------------------------------------------------------------ cost surrogate


def test_cost_surrogate_boundary_is_zero():
    out = cost_surrogate(ratios_node([1.0]), np.array([0.0]), 0.2, j_cost=5.0, d_limit=5.0, gamma=0.99)
    assert float(out.data) == 0.0


def test_cost_surrogate_takes_max_branch():
    out = cost_surrogate(ratios_node([1.5]), np.array([1.0]), 0.2, 0.0, 0.0, gamma=0.99)
    assert float(out.data) == pytest.approx(1.5)


def test_cost_surrogate_offset_term():
    out = cost_surrogate(ratios_node([1.0]), np.array([0.0]), 0.2, j_cost=60.0, d_limit=50.0, gamma=0.99)
    assert float(out.data) == pytest.approx(0.1)


# ------------------------------------------------------------ combination


def test_objective_relu_dead_keeps_reward_only():
    r = ratios_node([1.0, 1.1])
    reward = reward_surrogate(r, np.array([1.0, 0.5]), 0.2)
    costs = [cost_surrogate(r, np.array([-1.0, -0.5]), 0.2, 0.0, 10.0, 0.99)]
    total, bd = p3o_objective(reward, costs, kappa=20.0)
    assert float(total.data) == float(reward.data)
    assert bd.penalty_active == (False,)


def test_objective_active_channel_arithmetic():
    reward = ad.constant(np.array(1.5))
    cost = ad.constant(np.array(0.1))
    total, bd = p3o_objective(reward, [cost], kappa=20.0)
    assert float(total.data) == pytest.approx(1.5 + 2.0)
    assert bd.penalty_active == (True,)


def test_objective_two_channels_only_positive_flagged():
    reward = ad.constant(np.array(0.0))
    terms = [ad.constant(np.array(-0.3)), ad.constant(np.array(0.05))]
    total, bd = p3o_objective(reward, terms, kappa=20.0)
    assert float(total.data) == pytest.approx(1.0)
    assert bd.penalty_active == (False, True)


def test_breakdown_total_reconstructable():
    rng = np.random.default_rng(2)
    r = ratios_node(1.0 + rng.uniform(-0.4, 0.4, size=16))
    reward = reward_surrogate(r, rng.standard_normal(16), 0.2)
    costs = [
        cost_surrogate(r, rng.standard_normal(16), 0.2, j, 1.0, 0.99) for j in (0.5, 3.0)
    ]
    total, bd = p3o_objective(reward, costs, kappa=7.0)
    rebuilt = bd.reward_surrogate + bd.kappa * sum(max(0.0, c) for c in bd.cost_surrogates)
    assert abs(rebuilt - bd.total) <= 1e-12


def _gradient_case(rng, n=24):
    """Shared graph: ratios from a small gaussian policy on random data."""
    from p3o.nn import ParamStore, bind, grads_of, init_mlp, mlp_forward, policy_log_prob

    store = ParamStore()
    init_mlp(store, rng, [3, 8, 2], prefix="pi/")
    store.add("pi/log_std", np.full(2, -0.3))
    obs = rng.standard_normal((n, 3))
    actions = rng.standard_normal((n, 2))
    logp_old = rng.standard_normal(n) * 0.05
    adv_r = rng.standard_normal(n)
    # negative-leaning cost advantages + slack limit keep every surrogate < 0
    adv_c = [-np.abs(rng.standard_normal(n)) - 0.1 for _ in range(2)]
    head = GaussianHead(2)

    def build(with_penalty: bool, kappa=20.0):
        bound = bind(store)
        mean = mlp_forward(bound, ad.constant(obs), prefix="pi/")
        logp = policy_log_prob(head, (mean, bound["pi/log_std"]), actions)
        ratios = ad.exp(ad.sub(logp, ad.constant(logp_old)))
        reward = reward_surrogate(ratios, adv_r, 0.2)
        if not with_penalty:
            ad.backward(reward)
            return grads_of(bound)
        costs = [
            cost_surrogate(ratios, a, 0.2, j_cost=0.0, d_limit=5.0, gamma=0.99)
            for a in adv_c
        ]
        total, bd = p3o_objective(reward, costs, kappa)
        assert all(c < 0 for c in bd.cost_surrogates)
        ad.backward(total)
        return grads_of(bound)

    return build


def test_gradient_identity_when_penalty_inactive():
    # inactive rectifier: gradient bitwise equals the pure reward objective's
    for seed in range(10):
        rng = np.random.default_rng(seed)
        build = _gradient_case(rng)
        g_total = build(with_penalty=True)
        g_reward = build(with_penalty=False)
        for name in g_reward:
            assert np.array_equal(g_total[name], g_reward[name]), name


def test_monotone_in_kappa():
    rng = np.random.default_rng(5)
    r = 1.0 + rng.uniform(-0.3, 0.3, size=16)
    adv_r = rng.standard_normal(16)
    adv_c = np.abs(rng.standard_normal(16)) + 0.5  # positive surrogate
    values = []
    for kappa in [1.0, 5.0, 20.0, 50.0]:
        node = ratios_node(r)
        reward = reward_surrogate(node, adv_r, 0.2)
        cost = cost_surrogate(node, adv_c, 0.2, 10.0, 1.0, 0.99)
        total, _ = p3o_objective(reward, [cost], kappa)
        values.append(float(total.data))
    assert all(b > a for a, b in zip(values, values[1:]))


# ------------------------------------------------------------ KL and schedule


def test_mean_kl_direction_is_new_against_old():
    head = CategoricalHead(2)
    old = np.log(np.array([[0.9, 0.1]]))
    new = np.log(np.array([[0.5, 0.5]]))
    assert mean_kl(head, old, new) == pytest.approx(0.51083, abs=1e-5)


def test_mean_kl_nonnegative_and_zero_iff_identical():
    head = GaussianHead(2)
    rng = np.random.default_rng(0)
    for _ in range(20):
        mu_o, mu_n = rng.standard_normal((2, 4, 2))
        ls = rng.standard_normal(2) * 0.3
        kl = mean_kl(head, (mu_o, ls), (mu_n, ls))
        assert kl >= 0.0
    same = (rng.standard_normal((3, 2)), np.zeros(2))
    assert mean_kl(head, same, same) <= 1e-12


def test_update_kappa_examples():
    assert update_kappa(PenaltyConfig(kappa=20.0, growth=1.0)).kappa == 20.0
    assert update_kappa(PenaltyConfig(kappa=20.0, growth=2.0, kappa_max=30.0)).kappa == 30.0
    assert update_kappa(PenaltyConfig(kappa=5.0, growth=1.5)).kappa == 7.5


def test_kappa_sequence_monotone_bounded():
    cfg = PenaltyConfig(kappa=1.0, growth=1.7, kappa_max=40.0)
    seen = [cfg.kappa]
    for _ in range(12):
        cfg = update_kappa(cfg)
        seen.append(cfg.kappa)
    assert all(b >= a for a, b in zip(seen, seen[1:]))
    assert seen[-1] == 40.0


def test_penalty_config_validation():
    with pytest.raises(ValueError):
        PenaltyConfig(kappa=0.0)
    with pytest.raises(ValueError):
        PenaltyConfig(kappa=200.0, kappa_max=100.0)
    with pytest.raises(ValueError):
        PenaltyConfig(growth=0.5)
    with pytest.raises(ValueError):
        PenaltyConfig(clip_eps=1.5)
    with pytest.raises(ValueError):
        PenaltyConfig(kl_lower=0.2, kl_upper=0.1)


def test_clip_fraction():
    assert clip_fraction(np.array([1.0, 1.1, 1.5, 0.5]), 0.2) == pytest.approx(0.5)
    assert clip_fraction(np.array([]), 0.2) == 0.0
