import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffplan.doorkey import DoorKeyEnv, EnvConfig
from diffplan.experiments import PlanExecutor, variant_library
from diffplan.reward import RewardModel
from diffplan.rl import (CURVE_HEADER, Adam, PolicyValueNet, RMSprop, RolloutBuffer, RolloutWorkers, TrainerConfig,
                         a2c_update, clip_grad_norm, collect_rollouts, compute_gae, evaluate, gae, load_checkpoint, log_softmax,
                         normalize, orthogonal, policy_loss_and_grad, ppo_update, read_curve, save_checkpoint,
                         train, write_curve)

from oracles import numeric_gradient, relative_error


def _frozen_batch(seed=0, n=24, hidden=8, spread=0.1):
    rng = np.random.default_rng(seed)
    net = PolicyValueNet(15, 5, hidden, seed=seed)
    net.params[4] = rng.normal(0, 0.5, net.params[4].shape)
    obs = rng.uniform(-1, 1, (n, 15))
    actions = rng.integers(0, 5, n)
    logits, _, _ = net.forward(obs)
    logp = logits - np.log(np.exp(logits).sum(1, keepdims=True))
    old = logp[np.arange(n), actions] + rng.normal(0, spread, n)
    adv = rng.normal(size=n)
    ret = rng.normal(size=n)
    return net, obs, actions, old, adv, ret


def test_config_defaults_and_validation():
    c = TrainerConfig()
    assert (c.epochs, c.batch_size, c.frames_per_proc, c.discount, c.lr) == (4, 256, 128, 0.99, 1e-4)
    assert (c.gae_lambda, c.entropy_coef, c.value_loss_coef, c.max_grad_norm, c.clip_eps) == (0.95, 0.01, 0.5, 0.5, 0.2)
    assert (c.optim_eps, c.optim_alpha) == (1e-8, 0.99)
    for bad in ({"epochs": 0}, {"lr": 0.0}, {"clip_eps": 0.0}):
        with pytest.raises(ValueError):
            TrainerConfig(**bad)


# ---------------------------------------------------------------- network

@pytest.mark.parametrize("shape", [(15, 64), (64, 64), (64, 5), (64, 1)])
def test_orthogonal_init(shape):
    q = orthogonal(np.random.default_rng(0), shape, 2.0)
    small = min(shape)
    gram = q.T @ q if shape[0] >= shape[1] else q @ q.T
    np.testing.assert_allclose(gram, 4.0 * np.eye(small), atol=1e-10)


@given(st.integers(0, 1000))
def test_probabilities_sum_to_one(seed):
    net = PolicyValueNet(seed=seed)
    obs = np.random.default_rng(seed).uniform(-1, 1, (7, 15))
    probs, values = net.act_probs(obs)
    np.testing.assert_allclose(probs.sum(1), 1.0)
    assert values.shape == (7,) and np.all(np.isfinite(values))


def test_flat_parameters_round_trip():
    net = PolicyValueNet(seed=3)
    flat = net.get_flat()
    other = PolicyValueNet(seed=4)
    other.set_flat(flat)
    np.testing.assert_array_equal(other.get_flat(), flat)
    clone = net.copy()
    clone.params[0] += 1
    np.testing.assert_array_equal(net.get_flat(), flat)
    with pytest.raises(ValueError):
        other.set_flat(flat[:-1])


def test_clip_grad_norm():
    grads = [np.array([3.0]), np.array([4.0])]
    clipped, norm = clip_grad_norm(grads, 0.5)
    assert norm == 5.0
    assert math.sqrt(sum(float(g @ g) for g in clipped)) == pytest.approx(0.5)
    same, _ = clip_grad_norm(grads, 10.0)
    np.testing.assert_array_equal(same[0], grads[0])


def test_optimizers_first_step():
    p = [np.array([1.0, -2.0])]
    Adam(p, lr=0.1).step(p, [np.array([0.5, -3.0])])
    np.testing.assert_allclose(p[0], [0.9, -1.9], atol=1e-6)
    q = [np.array([1.0])]
    RMSprop(q, lr=0.1, alpha=0.99).step(q, [np.array([2.0])])
    np.testing.assert_allclose(q[0], [1.0 - 0.1 * 2.0 / math.sqrt(0.01 * 4.0)], atol=1e-6)


# ---------------------------------------------------------------- advantages

def test_gae_zero_inputs():
    adv, ret = gae(np.zeros((5, 2)), np.zeros((5, 2)), np.zeros((5, 2), bool), np.zeros(2))
    assert not adv.any() and not ret.any()


def test_gae_single_step_episode():
    adv, ret = gae(np.array([[2.0]]), np.array([[0.5]]), np.array([[True]]), np.array([9.0]))
    assert adv[0, 0] == 1.5 and ret[0, 0] == 2.0


def test_gae_three_step_recursion():
    r, v = np.array([1.0, 0.0, 2.0]), np.array([0.5, 0.2, 0.1])
    last, g, lam = 0.3, 0.9, 0.8
    d2 = r[2] + g * last - v[2]
    d1 = r[1] + g * v[2] - v[1]
    d0 = r[0] + g * v[1] - v[0]
    want = [d0 + g * lam * (d1 + g * lam * d2), d1 + g * lam * d2, d2]
    adv, _ = gae(r[:, None], v[:, None], np.zeros((3, 1), bool), np.array([last]), g, lam)
    np.testing.assert_allclose(adv[:, 0], want)


def test_gae_does_not_bootstrap_across_episode_end():
    adv, _ = gae(np.array([[1.0], [0.0]]), np.zeros((2, 1)), np.array([[True], [False]]), np.array([5.0]), 0.5, 1.0)
    assert adv[0, 0] == 1.0 and adv[1, 0] == 2.5


@given(st.integers(0, 1000))
def test_normalized_advantages(seed):
    x = np.random.default_rng(seed).normal(3, 7, 100)
    y = normalize(x)
    assert abs(y.mean()) < 1e-6 and abs(y.std() - 1) < 1e-6
    np.testing.assert_array_equal(normalize(np.zeros(4)), np.zeros(4))


# ---------------------------------------------------------------- losses

@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("clip", [True, False])
def test_total_loss_gradient_matches_finite_differences(seed, clip):
    net, obs, actions, old, adv, ret = _frozen_batch(seed, spread=0.4)
    cfg = TrainerConfig()
    _, _, grads = policy_loss_and_grad(net, obs, actions, old, adv, ret, cfg, clip)
    flat = net.get_flat()

    def loss(x):
        probe = net.copy()
        probe.set_flat(x)
        return policy_loss_and_grad(probe, obs, actions, old, adv, ret, cfg, clip)[0]

    num = numeric_gradient(loss, flat)
    assert relative_error(np.concatenate([g.ravel() for g in grads]), num) < 1e-3


def test_identical_policies_give_mean_advantage_loss():
    net, obs, actions, _, adv, ret = _frozen_batch(1)
    logits, _, _ = net.forward(obs)
    logp = logits - np.log(np.exp(logits).sum(1, keepdims=True))
    old = logp[np.arange(len(actions)), actions]
    _, stats, clipped = policy_loss_and_grad(net, obs, actions, old, adv, ret, TrainerConfig())
    assert stats["policy_loss"] == pytest.approx(-adv.mean())
    _, _, plain = policy_loss_and_grad(net, obs, actions, old, adv, ret, TrainerConfig(), clip=False)
    for a, b in zip(clipped, plain):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_unbounded_clip_equals_policy_gradient():
    net, obs, actions, old, adv, ret = _frozen_batch(2, spread=1.0)
    wide = TrainerConfig(clip_eps=1e9)
    _, _, g_clip = policy_loss_and_grad(net, obs, actions, old, adv, ret, wide)
    logp = log_softmax(net.forward(obs)[0])[np.arange(len(actions)), actions]
    ratio = np.exp(logp - old)
    _, _, g_plain = policy_loss_and_grad(net, obs, actions, old, adv * ratio, ret, wide, clip=False)
    for a, b in zip(g_clip, g_plain):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_zero_advantages_give_no_policy_gradient():
    net, obs, actions, old, adv, ret = _frozen_batch(3)
    cfg = TrainerConfig(entropy_coef=0.0, value_loss_coef=0.0)
    _, stats, grads = policy_loss_and_grad(net, obs, actions, old, np.zeros_like(adv), ret, cfg, clip=False)
    assert stats["policy_loss"] == 0.0
    assert all(not g.any() for g in grads)


def test_entropy_is_maximal_for_uniform_policy():
    net, obs, actions, old, adv, ret = _frozen_batch(4)
    net.params[4][:] = 0.0
    _, stats, _ = policy_loss_and_grad(net, obs, actions, old, adv, ret, TrainerConfig())
    assert stats["entropy"] == pytest.approx(math.log(5))


def _buffer(seed=0, T=16, n=4):
    rng = np.random.default_rng(seed)
    net = PolicyValueNet(seed=seed)
    obs = rng.uniform(-1, 1, (T, n, 15))
    logits, values, _ = net.forward(obs.reshape(T * n, 15))
    actions = rng.integers(0, 5, (T, n))
    logp = (logits - np.log(np.exp(logits).sum(1, keepdims=True)))[np.arange(T * n), actions.ravel()]
    buf = RolloutBuffer(obs, actions, logp.reshape(T, n), values.reshape(T, n), rng.normal(size=(T, n)),
                        rng.random((T, n)) < 0.1, rng.normal(size=n))
    compute_gae(buf)
    return net, buf


def test_a2c_matches_single_epoch_ppo_without_clipping():
    net, buf = _buffer()
    cfg = TrainerConfig(epochs=1, batch_size=len(buf), lr=1e-3)
    a, b = net.copy(), net.copy()
    ppo_update(a, buf, cfg, RMSprop(a.params, cfg.lr), np.random.default_rng(0))
    a2c_update(b, buf, cfg, RMSprop(b.params, cfg.lr))
    np.testing.assert_allclose(a.get_flat(), b.get_flat(), atol=1e-12)


def test_ppo_update_statistics():
    net, buf = _buffer(1, T=128)
    stats = ppo_update(net, buf, TrainerConfig(), Adam(net.params), np.random.default_rng(0))
    assert set(stats) == {"policy_loss", "value_loss", "entropy", "grad_norm"}
    assert all(np.isfinite(v) for v in stats.values())


def test_non_finite_loss_aborts():
    net, obs, actions, old, adv, ret = _frozen_batch(5)
    with pytest.raises(FloatingPointError):
        policy_loss_and_grad(net, obs, actions, old, adv, ret * np.inf, TrainerConfig())


# ---------------------------------------------------------------- rollouts and training

def test_rollout_buffer_size_and_raw_rewards():
    workers = RolloutWorkers(EnvConfig(8), 4, seed=0)
    buf = collect_rollouts(workers, PolicyValueNet(seed=0), 128, np.random.default_rng(0))
    assert len(buf) == 512 and buf.obs.shape == (128, 4, 15)
    nonzero = buf.rewards != 0
    assert np.all(buf.dones[nonzero]) and np.all((buf.rewards >= 0) & (buf.rewards <= 1))


def test_static_bonuses_only_at_planned_states():
    library = variant_library()
    env = DoorKeyEnv(EnvConfig(8))
    rng = np.random.default_rng(0)
    for episode in range(30):
        env.reset(episode)
        model = RewardModel("static", library)
        model.begin_episode(env.symbolic_state())
        planned = [m.post_state for m in model.plan.moves]
        seen = []
        done = False
        while not done:
            _, r, done, sym = env.step(int(rng.integers(5)))
            _, (_, bonus, _, _) = model.shape(r, sym)
            if bonus > 0:
                seen.append(sym.progress)
        assert seen == planned[:len(seen)]


def test_training_smoke_and_determinism():
    cfg = TrainerConfig(total_frames=20_000, seed=5)
    a = train(cfg, EnvConfig(8), "ppo", "static", variant_library())
    b = train(cfg, EnvConfig(8), "ppo", "static", variant_library())
    assert len(a.records) == math.ceil(20_000 / 512)
    assert a.records == b.records
    np.testing.assert_array_equal(a.net.get_flat(), b.net.get_flat())
    assert max(r["return_max"] for r in a.records) <= 1.0
    log = np.array(a.reward_log)
    first_bonus = np.flatnonzero(log[:, 3] > 0)
    first_success = np.flatnonzero(log[:, 2] > 0)
    assert len(first_bonus) and (not len(first_success) or first_bonus[0] <= first_success[0])


def test_a2c_training_runs():
    res = train(TrainerConfig(total_frames=2048, seed=1), EnvConfig(8), "a2c", "adaptive", variant_library())
    assert len(res.records) == 4
    assert np.array(res.reward_log)[:, 4].max() < 0
    with pytest.raises(ValueError):
        train(TrainerConfig(total_frames=512), EnvConfig(8), "dqn")


def test_curve_and_checkpoint_files(tmp_path):
    res = train(TrainerConfig(total_frames=1024, seed=2), EnvConfig(8))
    write_curve(tmp_path / "c.csv", res.records)
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == ",".join(CURVE_HEADER)
    curve = read_curve(tmp_path / "c.csv")
    np.testing.assert_array_equal(curve["frames"], [512, 1024])
    save_checkpoint(tmp_path / "m.csv", res.net)
    np.testing.assert_array_equal(load_checkpoint(tmp_path / "m.csv").get_flat(), res.net.get_flat())
    (tmp_path / "bad.csv").write_text("1.0\n")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "bad.csv")


# ---------------------------------------------------------------- evaluation

def test_planner_evaluation_reach_goal():
    mean, std = evaluate(PlanExecutor(variant_library()), EnvConfig(8), episodes=50)
    assert mean >= 95.0


def test_random_policy_rarely_succeeds_on_large_grid():
    net = PolicyValueNet(seed=0)
    mean, _ = evaluate(net, EnvConfig(16), episodes=10, seed=1)
    assert mean <= 30.0
    with pytest.raises(ValueError):
        evaluate(net, EnvConfig(8), episodes=0)
