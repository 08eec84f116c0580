import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2

from edgeorch.approx import MLP, Adam, PrioritizedReplayBuffer, ReplayBuffer, Transition, UndersizedBufferError


def linear_net(w, b):
    net = MLP((1, 1))
    net.weights[0][...] = w
    net.biases[0][...] = b
    return net


def t(i, a=0, r=0.0, dim=2):
    return Transition(np.full(dim, float(i)), a, r, np.full(dim, float(i) + 0.5))


def fd_max_rel_error(net, x, target, weight, h=1e-5):
    _, grads, _ = net.loss_and_grads(x, target, weight)
    worst = 0.0
    for p, g in zip(net.params, grads):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + h
            up = net.loss_and_grads(x, target, weight)[0]
            p[i] = old - h
            down = net.loss_and_grads(x, target, weight)[0]
            p[i] = old
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - g[i]) / max(1e-6, abs(num), abs(g[i])))
    return worst


def test_forward_zero_params():
    net = MLP((3, 4, 2))
    for p in net.params:
        p[...] = 0.0
    assert np.array_equal(net.forward(np.array([1.0, -2.0, 3.0])), np.zeros(2))


def test_forward_affine():
    assert linear_net([[2.0]], [1.0]).forward(np.array([3.0])).tolist() == [7.0]


def test_forward_deterministic_and_shape_checked(rng):
    net = MLP((4, 8, 3), rng)
    x = rng.normal(size=4)
    assert np.array_equal(net.forward(x), net.forward(x))
    with pytest.raises(ValueError):
        net.forward(np.zeros(5))


def test_zero_gradient_at_target(rng):
    net = MLP((3, 5, 2), rng)
    x = rng.normal(size=(4, 3))
    _, grads, _ = net.loss_and_grads(x, net.forward(x))
    assert all(np.all(g == 0) for g in grads)


def test_hand_gradient():
    net = linear_net([[1.0]], [0.0])
    net.biases[0][...] = 0.0
    _, grads, _ = net.loss_and_grads(np.array([[2.0]]), np.array([[0.0]]))
    assert grads[0][0, 0] == 8.0


def test_backward_errors():
    net = MLP((2, 1))
    with pytest.raises(ValueError):
        net.loss_and_grads(np.zeros((0, 2)), np.zeros((0, 1)))
    with pytest.raises(ValueError):
        net.loss_and_grads(np.zeros((1, 3)), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        net.loss_and_grads(np.zeros((1, 2)), np.zeros((1, 1)), np.array([-1.0]))


def test_finite_differences_one_network(rng):
    net = MLP((3, 4, 2), rng)
    x, target = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
    assert fd_max_rel_error(net, x, target, rng.uniform(0, 1, 5)) < 1e-4


def test_first_adam_step():
    p = [np.zeros(1)]
    Adam(p, lr=1e-3).step(p, [np.ones(1)])
    assert abs(p[0][0] - (-9.99999995e-4)) < 1e-12


def test_adam_zero_gradient_fixed_point():
    p = [np.array([0.3, -1.2])]
    Adam(p).step(p, [np.zeros(2)])
    assert p[0].tolist() == [0.3, -1.2]


def test_adam_second_step_not_larger():
    p = [np.zeros(1)]
    opt = Adam(p)
    opt.step(p, [np.ones(1)])
    first = abs(p[0][0])
    opt.step(p, [np.ones(1)])
    assert abs(p[0][0]) - first <= first * (1 + 1e-9)


def test_adam_rejects_non_finite():
    p = [np.zeros(2)]
    with pytest.raises(FloatingPointError):
        Adam(p).step(p, [np.array([1.0, np.nan])])
    assert p[0].tolist() == [0.0, 0.0]


def test_adam_minimises_square():
    p = [np.array([3.0])]
    opt = Adam(p, lr=0.05)
    for _ in range(2000):
        opt.step(p, [2 * p[0]])
    assert abs(p[0][0]) < 1e-2


def test_text_roundtrip(rng, tmp_path):
    net = MLP((3, 7, 2), rng)
    net.save(tmp_path / "net.txt")
    back = MLP.load(tmp_path / "net.txt")
    assert back.sizes == net.sizes
    assert all(np.array_equal(a, b) for a, b in zip(net.params, back.params))
    with pytest.raises(ValueError):
        MLP.from_text("3 2\n1.0\n")


def test_ring_eviction(rng):
    buf = ReplayBuffer(3, 2, rng)
    for i in range(4):
        buf.push(t(i))
    assert len(buf) == 3
    assert [tr.s[0] for tr in buf.transitions()] == [1.0, 2.0, 3.0]


def test_undersized_sample(rng):
    buf = PrioritizedReplayBuffer(10, 2, rng)
    buf.push(t(0))
    with pytest.raises(UndersizedBufferError):
        buf.sample(2)
    with pytest.raises(UndersizedBufferError):
        ReplayBuffer(10, 2, rng).sample(1)


def test_non_finite_reward_rejected(rng):
    with pytest.raises(ValueError):
        ReplayBuffer(4, 2, rng).push(t(0, r=float("inf")))


def test_degenerate_priorities(rng):
    buf = PrioritizedReplayBuffer(4, 2, rng, alpha=1.0, eps=0.0)
    buf.push(t(0))
    buf.push(t(1))
    buf.update_priorities(np.array([0, 1]), np.array([1.0, 1e-12]))
    idx = np.concatenate([buf.sample(2).indices for _ in range(5000)])
    assert np.mean(idx == 0) > 0.999


def test_skewed_priorities_chi_square(rng):
    k, draws = 5, 100_000
    buf = PrioritizedReplayBuffer(k, 2, rng, alpha=0.6, eps=0.0)
    for i in range(k):
        buf.push(t(i))
    buf.update_priorities(np.arange(k), np.arange(1, k + 1, dtype=float))
    expected = np.arange(1, k + 1) ** 0.6
    expected = expected / expected.sum() * draws
    idx = np.concatenate([buf.sample(k).indices for _ in range(draws // k)])
    counts = np.bincount(idx, minlength=k)
    assert float(((counts - expected) ** 2 / expected).sum()) < chi2.ppf(0.95, k - 1)


def uniform_chi_square(seed, k=8, draws=100_000):
    buf = PrioritizedReplayBuffer(k, 2, np.random.default_rng(seed))
    for i in range(k):
        buf.push(t(i))
    idx = np.concatenate([buf.sample(k).indices for _ in range(draws // k)])
    counts = np.bincount(idx, minlength=k)
    return float(((counts - draws / k) ** 2 / (draws / k)).sum()), chi2.ppf(0.95, k - 1)


def test_uniform_priorities_chi_square():
    # a 95% test rejects 5% of seeds by construction; check the rejection rate over 20 seeds
    rejected = sum(stat >= crit for stat, crit in (uniform_chi_square(s) for s in range(20)))
    assert rejected <= 3  # P(>= 4 of 20 | 5% rate) < 2%


def test_importance_weights_normalised(rng):
    buf = PrioritizedReplayBuffer(8, 2, rng)
    for i in range(8):
        buf.push(t(i))
    buf.update_priorities(np.arange(8), np.arange(8, dtype=float))
    b = buf.sample(8, beta=0.5)
    assert b.weights.max() == 1.0 and np.all(b.weights > 0)


def test_new_entries_take_max_priority(rng):
    buf = PrioritizedReplayBuffer(8, 2, rng)
    buf.push(t(0))
    buf.update_priorities(np.array([0]), np.array([5.0]))
    buf.push(t(1))
    assert buf.priorities[1] == buf.priorities[0]


def test_slot_with_action(rng):
    buf = PrioritizedReplayBuffer(8, 2, rng)
    for i, a in enumerate([3, 1, 3]):
        buf.push(t(i, a))
    assert buf.slot_with_action(3) == 2
    assert buf.slot_with_action(1) == 1
    assert buf.slot_with_action(7) is None
    buf.set_state(1, np.array([9.0, 9.0]))
    assert buf[1].s.tolist() == [9.0, 9.0] and buf[1].s_next.tolist() == [1.5, 1.5]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 5), st.integers(1, 5), st.integers(1, 6))
def test_finite_differences_random_networks(seed, n_in, hidden, n_out, batch):
    rng = np.random.default_rng(seed)
    net = MLP((n_in, hidden, n_out), rng)
    for b in net.biases:
        b[...] = rng.normal(size=b.shape)
    x, target = rng.normal(size=(batch, n_in)), rng.normal(size=(batch, n_out))
    # keep clear of ReLU kinks where central differences are undefined
    pre = x @ net.weights[0] + net.biases[0]
    if np.min(np.abs(pre)) < 1e-3:
        return
    assert fd_max_rel_error(net, x, target, rng.uniform(0, 1, batch)) < 1e-4


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 40))
def test_ring_keeps_newest(capacity, pushes):
    buf = ReplayBuffer(capacity, 1, np.random.default_rng(0))
    for i in range(pushes):
        buf.push(Transition(np.array([float(i)]), 0, 0.0, np.array([0.0])))
    kept = [tr.s[0] for tr in buf.transitions()]
    assert kept == [float(i) for i in range(max(0, pushes - capacity), pushes)]
