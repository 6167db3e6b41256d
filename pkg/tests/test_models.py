import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given
from scipy.stats import entropy

from sgail import (
    LOG_PROB_FLOOR,
    ActionModel,
    AdamConfig,
    AdamState,
    AirlDiscriminator,
    Categorical,
    ConditionalPolicy,
    DiagGaussian,
    DimensionError,
    EmptyBatchError,
    NonFiniteError,
    PlainDiscriminator,
    PosteriorQ,
    TaskVariable,
    TransitionBatch,
    ValueFunction,
    adam_step,
    advantage,
    airl_d,
    policy_distribution,
    posterior_log_q,
    pseudo_reward,
    value,
)

C1, C2 = TaskVariable(0), TaskVariable(1)
finite = st.floats(min_value=-30, max_value=30)


def _batch(rng, n, d_s, d_a, categorical=True, log_pi=True):
    features = rng.normal(size=(n, d_s))
    if categorical:
        actions = np.eye(d_a)[rng.integers(d_a, size=n)]
    else:
        actions = rng.normal(size=(n, d_a))
    tasks = np.eye(3)[rng.integers(2, size=n)]
    return TransitionBatch(features, actions, tasks, rng.normal(size=(n, d_s)), np.zeros(n, dtype=bool),
                           rng.uniform(-3, 0, size=n) if log_pi else None)


def _check_gradient(loss, params, analytic, rng, n_coords=100, eps=1e-6):
    coords = rng.choice(len(params), size=min(n_coords, len(params)), replace=False)
    numeric = []
    for i in coords:
        step = np.zeros(len(params))
        step[i] = eps
        numeric.append((loss(params + step) - loss(params - step)) / (2 * eps))
    numeric = np.array(numeric)
    rel = np.linalg.norm(analytic[coords] - numeric) / (np.linalg.norm(analytic[coords]) + np.linalg.norm(numeric))
    assert rel <= 1e-4


def test_zero_parameter_categorical_policy_is_uniform():
    policy = ConditionalPolicy.build(2, 4, ActionModel.Categorical)
    policy.set_params(np.zeros(policy.n_params))
    np.testing.assert_allclose(policy_distribution(policy, np.array([0.3, 0.7]), C1).probs, np.full(4, 0.25))


def test_gaussian_policy_starts_with_half_unit_spread():
    policy = ConditionalPolicy.build(6, 2, ActionModel.Gaussian)
    dist = policy(np.zeros(6), C2)
    assert isinstance(dist, DiagGaussian)
    np.testing.assert_allclose(dist.std, [0.5, 0.5])


def test_airl_d_examples():
    assert airl_d(0.0, 0.0) == 0.5
    assert airl_d(np.log(0.3), np.log(0.3)) == pytest.approx(0.5)
    assert float(airl_d(2.0, np.log(0.25))) == pytest.approx(np.exp(2) / (np.exp(2) + 0.25), rel=1e-12)


def test_airl_d_rejects_non_finite_inputs():
    with pytest.raises(NonFiniteError):
        airl_d(np.nan, 0.0)
    with pytest.raises(NonFiniteError):
        airl_d(0.0, -np.inf)


@given(finite, finite, st.floats(min_value=0.01, max_value=5))
def test_airl_d_is_monotone(f, log_pi, delta):
    assert airl_d(f + delta, log_pi) >= airl_d(f, log_pi)
    assert airl_d(f, log_pi + delta) <= airl_d(f, log_pi)


def test_log_odds_plus_entropy_term_equals_the_closed_form_reward():
    rng = np.random.default_rng(0)
    f = rng.uniform(-5, 5, 10_000)
    log_pi = rng.uniform(-5, 0, 10_000)
    beta = rng.uniform(0, 1, 10_000)
    d = airl_d(f, log_pi)
    algorithm_form = np.log(d) - np.log1p(-d) + beta * log_pi
    np.testing.assert_allclose(algorithm_form, pseudo_reward(f, log_pi, beta), rtol=0, atol=1e-9)


def test_pseudo_reward_examples():
    assert pseudo_reward(1.7, np.log(0.1), 1.0) == pytest.approx(1.7)
    assert pseudo_reward(0.0, np.log(0.5), 0.0) == pytest.approx(0.693147, abs=1e-6)


def test_value_function_examples():
    v = ValueFunction.build(2)
    s = np.array([0.2, 0.9])
    assert value(v, s, C1) == value(v, s, C1)
    v.set_params(np.zeros(v.net.n_params))
    assert value(v, s, C1) == 0.0


def test_value_regression_moves_toward_the_target():
    v = ValueFunction.build(2, init_seed=4)
    s = np.array([[0.2, 0.9]])
    before = value(v, s[0], C1)
    _, grad = v.loss_and_grad(s, [C1], [1.0])
    params, _ = adam_step(v.get_params(), grad, AdamState.zeros(v.net.n_params), AdamConfig(lr=1e-4))
    v.set_params(params)
    assert abs(value(v, s[0], C1) - 1.0) < abs(before - 1.0)


def _constant_value(v_const):
    v = ValueFunction.build(2, hidden_layers=(4,))
    params = np.zeros(v.net.n_params)
    params[-1] = v_const
    v.set_params(params)
    return v


def test_advantage_examples():
    s, s_next = np.array([0.1, 0.2]), np.array([0.3, 0.2])
    assert advantage(0.7, _constant_value(0.0), s, s_next, C1, 0.95) == pytest.approx(0.7)
    assert advantage(0.0, _constant_value(2.0), s, s_next, C1, 0.95) == pytest.approx(-0.1)
    assert advantage(0.0, _constant_value(2.0), s, s_next, C1, 0.95, terminal=True) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        advantage(0.0, _constant_value(2.0), s, s_next, C1, 1.0)


def test_advantage_of_a_batch_matches_one_by_one_evaluation():
    rng = np.random.default_rng(3)
    v = ValueFunction.build(2, init_seed=1)
    s, s_next = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
    c = np.eye(3)[rng.integers(2, size=20)]
    r = rng.normal(size=20)
    done = rng.random(20) < 0.3
    batch = advantage(r, v, s, s_next, c, 0.95, done)
    single = [r[i] + 0.95 * (0.0 if done[i] else v(s_next[i], c[i])) - v(s[i], c[i]) for i in range(20)]
    np.testing.assert_allclose(batch, single, rtol=0, atol=1e-12)


def test_posterior_examples():
    q = PosteriorQ.build(2, 4)
    q.set_params(np.zeros(q.net.n_params))
    np.testing.assert_allclose(posterior_log_q(q, np.array([0.5, 0.5]), np.eye(4)[0]), np.log(np.full(3, 1 / 3)))
    q = PosteriorQ.build(2, 4, init_seed=2)
    rng = np.random.default_rng(0)
    log_q = posterior_log_q(q, rng.normal(size=(10, 2)), np.eye(4)[rng.integers(4, size=10)])
    np.testing.assert_allclose(np.exp(log_q).sum(axis=1), 1.0, atol=1e-9)


def test_posterior_learns_a_deterministic_labelling():
    rng = np.random.default_rng(7)
    s = rng.uniform(0.1, 1.0, size=(200, 2)) * rng.choice([-1.0, 1.0], size=(200, 1))
    labels = (s[:, 0] < 0).astype(int)
    actions = np.zeros((200, 1))
    q = PosteriorQ.build(2, 1, hidden_layers=(16,), init_seed=0)
    state = AdamState.zeros(q.net.n_params)
    for _ in range(1000):
        _, grad = q.loss_and_grad(s, actions, labels)
        params, state = adam_step(q.get_params(), grad, state, AdamConfig(lr=0.02))
        q.set_params(params)
    accuracy = np.mean(np.argmax(q.log_q(s, actions), axis=1) == labels)
    assert accuracy >= 0.99


def test_task_code_changes_conditioned_outputs_only():
    rng = np.random.default_rng(1)
    b1 = _batch(rng, 5, 2, 4)
    b2 = TransitionBatch(b1.features, b1.actions, np.tile(C2.vector, (5, 1)), b1.next_features, b1.done, b1.log_pi)
    b1 = TransitionBatch(b1.features, b1.actions, np.tile(C1.vector, (5, 1)), b1.next_features, b1.done, b1.log_pi)
    policy = ConditionalPolicy.build(2, 4, ActionModel.Categorical, init_seed=1)
    assert not np.allclose(policy(b1.features, b1.tasks).probs, policy(b2.features, b2.tasks).probs)
    airl = AirlDiscriminator.build(2, 4, init_seed=2)
    assert not np.allclose(airl.f(b1), airl.f(b2))
    v = ValueFunction.build(2, init_seed=3)
    assert not np.allclose(v(b1.features, b1.tasks), v(b2.features, b2.tasks))
    plain = PlainDiscriminator.build(2, 4, init_seed=4)
    np.testing.assert_array_equal(plain.logit(b1), plain.logit(b2))
    unconditioned = ConditionalPolicy.build(2, 4, ActionModel.Categorical, conditioned=False)
    np.testing.assert_array_equal(unconditioned(b1.features, C1).probs, unconditioned(b1.features, C2).probs)


@pytest.mark.parametrize("model", list(ActionModel))
def test_grad_log_prob_matches_central_differences(model):
    rng = np.random.default_rng(11)
    d_s, d_a = (2, 4) if model == ActionModel.Categorical else (6, 2)
    policy = ConditionalPolicy.build(d_s, d_a, model, init_seed=5)
    b = _batch(rng, 8, d_s, d_a, categorical=model == ActionModel.Categorical)
    w = rng.normal(size=8)

    def objective(params):
        twin = policy.copy()
        twin.set_params(params)
        return float(np.sum(w * twin.log_prob(b.features, b.tasks, b.actions)))

    _check_gradient(objective, policy.get_params(), policy.grad_log_prob(b.features, b.tasks, b.actions, w), rng)


@pytest.mark.parametrize("head", [AirlDiscriminator, PlainDiscriminator])
def test_discriminator_gradient_matches_central_differences(head):
    rng = np.random.default_rng(12)
    disc = head.build(2, 4, init_seed=6, conditioned=head is AirlDiscriminator)
    expert, generated = _batch(rng, 10, 2, 4), _batch(rng, 12, 2, 4)
    _, grad = disc.loss_and_grad(expert, generated)

    def objective(params):
        disc.set_params(params)
        return disc.loss_and_grad(expert, generated)[0]

    base = disc.get_params()
    _check_gradient(objective, base, grad, rng)
    disc.set_params(base)


def test_value_and_posterior_gradients_match_central_differences():
    rng = np.random.default_rng(13)
    b = _batch(rng, 9, 6, 2, categorical=False)
    targets = rng.normal(size=9)
    v = ValueFunction.build(6, init_seed=7)
    _, grad = v.loss_and_grad(b.features, b.tasks, targets)

    def v_loss(params):
        v.set_params(params)
        return v.loss_and_grad(b.features, b.tasks, targets)[0]

    _check_gradient(v_loss, v.get_params(), grad, rng)

    q = PosteriorQ.build(6, 2, init_seed=8)
    labels = b.task_indices
    _, grad = q.loss_and_grad(b.features, b.actions, labels)

    def q_loss(params):
        q.set_params(params)
        return q.loss_and_grad(b.features, b.actions, labels)[0]

    _check_gradient(q_loss, q.get_params(), grad, rng)


@pytest.mark.parametrize("model", list(ActionModel))
def test_fisher_vector_product_is_the_kl_curvature(model):
    rng = np.random.default_rng(14)
    d_s, d_a = (2, 4) if model == ActionModel.Categorical else (6, 2)
    policy = ConditionalPolicy.build(d_s, d_a, model, hidden_layers=(16, 16), init_seed=9)
    b = _batch(rng, 10, d_s, d_a)
    old = policy(b.features, b.tasks)
    base = policy.get_params()
    v = rng.normal(size=policy.n_params)
    v /= np.linalg.norm(v)
    eps = 1e-4

    def kl_at(params):
        twin = policy.copy()
        twin.set_params(params)
        return twin.kl(b.features, b.tasks, old)

    curvature = (kl_at(base + eps * v) + kl_at(base - eps * v) - 2 * kl_at(base)) / eps ** 2
    assert v @ policy.fisher_vector_product(b.features, b.tasks, v) == pytest.approx(curvature, rel=1e-3)


def test_categorical_kl_and_entropy_match_scipy():
    p, q = Categorical(np.array([0.1, 0.2, 0.3, 0.4])), Categorical(np.array([0.25, 0.25, 0.4, 0.1]))
    assert p.kl(q) == pytest.approx(entropy(p.probs, q.probs))
    assert p.entropy() == pytest.approx(entropy(p.probs))
    assert Categorical.one_hot(2, 4).entropy() == 0.0


def test_gaussian_entropy_and_clamped_log_prob():
    dist = DiagGaussian(np.zeros(2), np.log(np.array([0.5, 2.0])))
    assert dist.entropy() == pytest.approx(np.sum(0.5 * np.log(2 * np.pi * np.e * np.array([0.25, 4.0]))))
    far = np.array([1e3, 0.0])
    assert dist.clamped_log_prob(far) >= 2 * LOG_PROB_FLOOR
    assert dist.log_prob(far) < dist.clamped_log_prob(far)


def test_empty_batches_are_rejected():
    v = ValueFunction.build(2)
    with pytest.raises(EmptyBatchError):
        v.loss_and_grad(np.zeros((0, 2)), np.zeros((0, 3)), np.zeros(0))
    disc = AirlDiscriminator.build(2, 4)
    rng = np.random.default_rng(0)
    with pytest.raises(EmptyBatchError):
        disc.loss_and_grad(_batch(rng, 0, 2, 4), _batch(rng, 3, 2, 4))


def test_task_codes_of_the_wrong_width_raise():
    v = ValueFunction.build(2)
    with pytest.raises(DimensionError):
        v(np.zeros((2, 2)), np.zeros((2, 4)))
