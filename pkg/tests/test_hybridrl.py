import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetnetlab.capacity import PowerModel
from hetnetlab.hybridrl import (
    MLP,
    BanditEnv,
    Batch,
    ChainMDP,
    HetNetEnv,
    HybridActionSpace,
    HybridAgent,
    HybridHyperParams,
    ReplayMemory,
    TrainingDiverged,
    dump_agent,
    load_networks,
    rollout,
    train,
)
from hetnetlab.rng import derive_rng
from hetnetlab.scenario import ScenarioConfig, make_scenario


def _agent(seed=0, state_dim=3, n=2, hidden=(16, 16), zero=False, **hp):
    space = HybridActionSpace.uniform(n)
    return HybridAgent.create(state_dim, space, HybridHyperParams(hidden=hidden, **hp), derive_rng(seed, "agent"), zero)


def test_zero_weights_give_zero_q():
    agent = _agent(zero=True)
    r = derive_rng(1, "s")
    for _ in range(20):
        s = r.normal(size=3)
        assert agent.q_value(s, int(r.integers(2)), float(r.random())) == 0.0


def test_q_is_deterministic():
    agent = _agent()
    s = np.array([0.1, -0.3, 2.0])
    assert agent.q_value(s, 1, 0.4) == agent.q_value(s, 1, 0.4)


@pytest.mark.parametrize("k, x", [(2, 0.5), (-1, 0.5), (0, 1.5), (1, -0.01)])
def test_q_rejects_actions_outside_space(k, x):
    with pytest.raises(ValueError):
        _agent().q_value(np.zeros(3), k, x)


def test_q_gradient_matches_finite_differences():
    worst = 0.0
    for seed in range(10):
        agent = _agent(seed)
        r = derive_rng(seed, "fd")
        for _ in range(10):
            s = r.normal(size=3)
            k = int(r.integers(2))
            x = float(r.uniform(0.05, 0.95))
            eps = 1e-6
            fd = (agent.q_value(s, k, x + eps) - agent.q_value(s, k, x - eps)) / (2 * eps)
            g = agent.q_grad_x(s, k, x)
            worst = max(worst, abs(g - fd) / max(abs(fd), 1e-8))
    assert worst < 1e-4


def test_mlp_parameter_gradients_match_finite_differences():
    r = derive_rng(3, "mlp")
    net = MLP([4, 5, 3, 2], r)
    x = r.normal(size=(6, 4))
    upstream = r.normal(size=(6, 2))
    _, acts = net.forward(x)
    grads, g_in = net.backward(acts, upstream)
    f = lambda: float(np.sum(net(x) * upstream))
    eps = 1e-6
    for p, g in zip(net.params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            up = f()
            p[idx] = old - eps
            down = f()
            p[idx] = old
            assert abs((up - down) / (2 * eps) - g[idx]) < 1e-6 * max(1.0, abs(g[idx]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.1, 50.0), st.floats(-5, 5), st.floats(0.01, 10))
def test_policy_respects_bounds(seed, scale, low, width):
    space = HybridActionSpace(np.array([low, low - 1.0]), np.array([low + width, low + 2 * width]))
    agent = HybridAgent.create(4, space, HybridHyperParams(hidden=(8,)), derive_rng(seed, "b"))
    for w in agent.policy_net.weights:
        w *= scale
    states = derive_rng(seed, "states").normal(scale=10.0, size=(10_000, 4))
    x = agent.continuous_policy(states)
    assert np.all(x >= space.low) and np.all(x <= space.high)


def test_zero_policy_outputs_midpoint():
    space = HybridActionSpace(np.array([0.0, -2.0]), np.array([1.0, 6.0]))
    agent = HybridAgent.create(3, space, HybridHyperParams(), None, zero=True)
    assert np.allclose(agent.continuous_policy(np.ones(3)), [0.5, 2.0])


def test_action_space_validation():
    with pytest.raises(ValueError):
        HybridActionSpace(np.array([1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        HybridActionSpace(np.array([0.0, 0.0]), np.array([1.0]))


def _batch(agent, n=4, done=False, seed=0):
    r = derive_rng(seed, "batch")
    return Batch(
        r.normal(size=(n, agent.state_dim)), r.integers(0, agent.space.n, n), r.random((n, agent.space.n)),
        r.normal(size=n), r.normal(size=(n, agent.state_dim)), np.full(n, done),
    )


def test_bellman_terminal_and_zero_discount():
    agent = _agent()
    b = _batch(agent, done=True)
    assert np.array_equal(agent.bellman_target(b), b.r)
    b2 = _batch(agent, done=False)
    assert np.array_equal(agent.bellman_target(b2, discount=0.0), b2.r)
    with pytest.raises(ValueError):
        agent.bellman_target(b2, discount=1.0)


def test_bellman_takes_max_over_branches():
    agent = _agent(hidden=(), discount=0.7)
    w = agent.q_target.weights[0]
    w[:] = 0.0
    w[agent.state_dim + 0, 0] = 5.0
    w[agent.state_dim + 1, 0] = 3.0
    b = Batch.single(np.zeros(3), 0, [0.2, 0.2], 1.5, np.ones(3), False)
    assert agent.bellman_target(b)[0] == pytest.approx(1.5 + 0.7 * 5.0)


def test_zero_td_error_leaves_critic_unchanged():
    agent = _agent(discount=0.0)
    b = _batch(agent)
    b.r = agent.q_batch(b.s, b.k, b.x)
    before = [p.copy() for p in agent.q_net.params]
    agent.critic_step(b)
    assert all(np.allclose(p, q, atol=1e-12) for p, q in zip(agent.q_net.params, before))


def test_critic_step_reduces_td_error():
    for seed in range(5):
        agent = _agent(seed, lr_q=1e-4)
        b = _batch(agent, n=1, seed=seed)
        before = agent.td_errors(b)[0] ** 2
        agent.critic_step(b)
        assert agent.td_errors(b)[0] ** 2 < before


def test_actor_step_increases_objective():
    for seed in range(5):
        agent = _agent(seed, lr_policy=1e-4)
        s = _batch(agent, n=8, seed=seed).s
        before = agent.policy_objective(s)
        agent.actor_step(s)
        assert agent.policy_objective(s) > before


def test_parameter_separation():
    agent = _agent()
    b = _batch(agent)
    pol = [p.copy() for p in agent.policy_net.params]
    agent.critic_step(b)
    assert all(np.array_equal(p, q) for p, q in zip(agent.policy_net.params, pol))
    crit = [p.copy() for p in agent.q_net.params]
    agent.actor_step(b.s)
    assert all(np.array_equal(p, q) for p, q in zip(agent.q_net.params, crit))


def test_non_finite_loss_aborts():
    agent = _agent()
    b = _batch(agent)
    b.r[0] = np.nan
    with pytest.raises(TrainingDiverged):
        agent.critic_step(b)


def test_replay_memory_wraps():
    mem = ReplayMemory(3, 1, 2)
    for i in range(5):
        mem.push([i], 0, [0, 0], float(i), [i], False)
    assert len(mem) == 3
    assert sorted(mem.r.tolist()) == [2.0, 3.0, 4.0]


def test_zero_episodes_leave_agent_untouched():
    env = BanditEnv()
    hp = HybridHyperParams()
    agent = HybridAgent.create(env.state_dim, env.action_space, hp, derive_rng(0, "a"))
    snapshot = [p.copy() for p in agent.q_net.params + agent.policy_net.params]
    agent2, returns = train(env, 0, hp, derive_rng(0, "t"), agent)
    assert returns == [] and agent2 is agent and agent.steps == 0
    assert all(np.array_equal(p, q) for p, q in zip(agent.q_net.params + agent.policy_net.params, snapshot))


def test_training_is_reproducible():
    hp = HybridHyperParams(discount=0.0, max_episode_steps=1, warmup=16)
    _, a = train(BanditEnv(), 150, hp, derive_rng(9, "train"))
    _, b = train(BanditEnv(), 150, hp, derive_rng(9, "train"))
    assert a == b


def test_bandit_optimum_by_construction():
    env = BanditEnv()
    grid = np.linspace(0, 1, 1001)
    best = max((env.reward(k, x), k, x) for k in range(2) for x in grid)
    assert (best[1], best[2]) == (0, pytest.approx(0.3))
    assert env.optimum == (0, 0.3)


def test_chain_mdp_matches_value_iteration():
    env = ChainMDP(0.5, derive_rng(0, "chain-env"))
    hp = HybridHyperParams(discount=0.5, max_episode_steps=10, eps_start=1.0, eps_end=0.3,
                           noise_start=0.5, noise_end=0.3, eps_decay_steps=4000, noise_decay_steps=4000,
                           tau_soft=0.02)
    agent, _ = train(env, 800, hp, derive_rng(0, "chain"))
    q_star = env.value_iteration()
    learned = np.array([[[agent.q_value(env.encode(s), k, float(x)) for x in env.grid]
                         for k in range(2)] for s in range(3)])
    assert np.max(np.abs(learned - q_star)) < 0.1


@pytest.fixture(scope="module")
def hetnet_env():
    sc = make_scenario(ScenarioConfig(), derive_rng(0, "scenario"))
    return HetNetEnv(sc, "mrt", PowerModel(), qos_weight=1.0, min_rate=0.5, horizon=50)


def test_hetnet_noop_keeps_state(hetnet_env):
    env = hetnet_env
    s0 = env.reset()
    reward0, _, _ = env.evaluate(env.state.active, env.state.fractions)
    s1, r, done = env.step(0, float(env.state.fractions[0]))
    assert r == pytest.approx(reward0)
    assert np.array_equal(s1[:-1], s0[:-1]) and not done
    assert s1[-1] == pytest.approx(1 / env.horizon)


def test_hetnet_idle_cell_off_raises_ee(hetnet_env):
    env = hetnet_env
    env.reset()
    fractions = np.ones(env.m)
    fractions[2] = 0.0
    on = np.ones(env.m, dtype=bool)
    off = on.copy()
    off[2] = False
    assert env.evaluate(off, fractions)[1] > env.evaluate(on, fractions)[1]


def test_hetnet_rejects_invalid_actions(hetnet_env):
    env = hetnet_env
    env.reset()
    with pytest.raises(ValueError):
        env.step(env.m, 0.5)
    with pytest.raises(ValueError):
        env.step(1, 1.5)


def test_hetnet_episode_length(hetnet_env):
    env = hetnet_env
    env.reset()
    steps = 0
    done = False
    while not done:
        _, _, done = env.step(0, 1.0)
        steps += 1
    assert steps == env.horizon
    assert env.observe().shape == (env.state_dim,)


def test_greedy_lookahead_beats_random(hetnet_env):
    env = hetnet_env
    greedy = rollout(env, lambda e, s, r: e.greedy_action())
    randoms = [
        rollout(env, lambda e, s, r: (int(r.integers(e.m)), float(r.random())), derive_rng(i, "random-policy"))
        for i in range(100)
    ]
    assert greedy >= np.mean(randoms)


def test_weight_dump_roundtrip(tmp_path):
    agent = _agent()
    path = tmp_path / "w.bin"
    dump_agent(agent, path)
    nets = load_networks(path)
    assert list(nets) == ["q", "policy"]
    for name, net in (("q", agent.q_net), ("policy", agent.policy_net)):
        assert nets[name].sizes == net.sizes
        assert all(np.array_equal(a, b) for a, b in zip(nets[name].params, net.params))
    raw = path.read_bytes()
    assert raw[:8] == b"HNETRLW1"
    (tmp_path / "bad.bin").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ValueError, match="magic"):
        load_networks(tmp_path / "bad.bin")
    (tmp_path / "long.bin").write_bytes(raw + b"\0")
    with pytest.raises(ValueError, match="trailing"):
        load_networks(tmp_path / "long.bin")
