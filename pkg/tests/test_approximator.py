import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from sgail import Approximator, ApproximatorSpec, DimensionError, OutputHead, SpecError

# widths of every network the experiments build: grid (2 state, 4 action) and reacher (6 state, 2 action)
ARCHITECTURES = [
    ApproximatorSpec(5, (64, 64), 4, OutputHead.Softmax),
    ApproximatorSpec(2, (64, 64), 4, OutputHead.Softmax),
    ApproximatorSpec(9, (64, 64), 2),
    ApproximatorSpec(9, (64, 64), 1),
    ApproximatorSpec(6, (64, 64), 1),
    ApproximatorSpec(11, (64, 64), 1),
    ApproximatorSpec(8, (64, 64), 3, OutputHead.Softmax),
    ApproximatorSpec(5, (64, 64), 1),
    ApproximatorSpec(2, (64, 64), 1),
]


def _numeric_grad(net, x, g, coords, eps=1e-6):
    base = net.get_params()
    out = np.empty(len(coords))
    for k, i in enumerate(coords):
        plus, minus = base.copy(), base.copy()
        plus[i] += eps
        minus[i] -= eps
        net.set_params(plus)
        f_plus = np.sum(net(x) * g)
        net.set_params(minus)
        f_minus = np.sum(net(x) * g)
        out[k] = (f_plus - f_minus) / (2 * eps)
    net.set_params(base)
    return out


@pytest.mark.parametrize("spec", ARCHITECTURES, ids=repr)
def test_backward_matches_central_differences(spec):
    rng = np.random.default_rng(spec.input_dim * 10 + spec.output_dim)
    net = Approximator.build(spec, 3)
    net.set_params(net.get_params() + rng.normal(0, 0.05, net.n_params))
    x = rng.normal(size=(7, spec.input_dim))
    g = rng.normal(size=(7, spec.output_dim))
    coords = rng.choice(net.n_params, size=120, replace=False)
    analytic = net.backward(x, g)[coords]
    numeric = _numeric_grad(net, x, g, coords)
    rel = np.linalg.norm(analytic - numeric) / (np.linalg.norm(analytic) + np.linalg.norm(numeric))
    assert rel <= 1e-4


def test_backward_wrt_logits_matches_differences_of_the_logits():
    spec = ApproximatorSpec(3, (8,), 4, OutputHead.Softmax)
    rng = np.random.default_rng(0)
    net = Approximator.build(spec, 1)
    x, g = rng.normal(size=(5, 3)), rng.normal(size=(5, 4))
    base = net.get_params()
    numeric = np.empty(net.n_params)
    for i in range(net.n_params):
        step = np.zeros(net.n_params)
        step[i] = 1e-6
        net.set_params(base + step)
        up = np.sum(net.logits(x) * g)
        net.set_params(base - step)
        down = np.sum(net.logits(x) * g)
        numeric[i] = (up - down) / 2e-6
    net.set_params(base)
    np.testing.assert_allclose(net.backward(x, g, wrt="logits"), numeric, rtol=1e-5, atol=1e-8)


def test_jvp_is_the_transpose_of_backward():
    spec = ApproximatorSpec(4, (16, 16), 3)
    rng = np.random.default_rng(5)
    net = Approximator.build(spec, 2)
    x = rng.normal(size=(6, 4))
    tangent = rng.normal(size=net.n_params)
    cotangent = rng.normal(size=(6, 3))
    assert np.sum(net.jvp(x, tangent) * cotangent) == pytest.approx(tangent @ net.backward(x, cotangent,
                                                                                           wrt="logits"))


def test_softmax_rows_are_distributions():
    net = Approximator.build(ApproximatorSpec(5, (64, 64), 4, OutputHead.Softmax), 0)
    p = net(np.random.default_rng(0).normal(size=(10, 5)) * 100)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0)


def test_single_input_gives_a_single_output():
    net = Approximator.build(ApproximatorSpec(3, (4,), 2), 0)
    x = np.array([0.1, -0.2, 0.3])
    assert net(x).shape == (2,)
    np.testing.assert_array_equal(net(x), net(x[None, :])[0])


def test_empty_batch_has_zero_gradient():
    net = Approximator.build(ApproximatorSpec(3, (4,), 2), 0)
    assert net(np.zeros((0, 3))).shape == (0, 2)
    np.testing.assert_array_equal(net.backward(np.zeros((0, 3)), np.zeros((0, 2))), np.zeros(net.n_params))


def test_zero_parameters_give_zero_output():
    net = Approximator(ApproximatorSpec(3, (4, 4), 1))
    np.testing.assert_array_equal(net(np.ones((2, 3))), np.zeros((2, 1)))


def test_build_is_reproducible_for_a_seed():
    spec = ApproximatorSpec(5, (64, 64), 1)
    np.testing.assert_array_equal(Approximator.build(spec, 7).get_params(), Approximator.build(spec, 7).get_params())
    assert not np.array_equal(Approximator.build(spec, 7).get_params(), Approximator.build(spec, 8).get_params())


def test_set_params_rejects_wrong_length():
    net = Approximator.build(ApproximatorSpec(3, (4,), 2), 0)
    with pytest.raises(DimensionError):
        net.set_params(np.zeros(net.n_params + 1))


def test_wrong_input_width_raises():
    net = Approximator.build(ApproximatorSpec(3, (4,), 2), 0)
    with pytest.raises(DimensionError):
        net(np.zeros((2, 4)))


def test_wrong_output_gradient_shape_raises():
    net = Approximator.build(ApproximatorSpec(3, (4,), 2), 0)
    with pytest.raises(DimensionError):
        net.backward(np.zeros((2, 3)), np.zeros((2, 3)))


@pytest.mark.parametrize("kwargs", [dict(input_dim=0), dict(input_dim=3, hidden_layers=(4, 0)),
                                    dict(input_dim=3, output_dim=1, output_head=OutputHead.Softmax)])
def test_impossible_specs_are_rejected(kwargs):
    with pytest.raises(SpecError):
        ApproximatorSpec(**kwargs)


@settings(deadline=None, max_examples=30)
@given(st.lists(st.integers(min_value=1, max_value=8), max_size=3), st.integers(min_value=1, max_value=6),
       st.integers(min_value=1, max_value=4))
def test_parameter_count_matches_layer_shapes(hidden, n_in, n_out):
    spec = ApproximatorSpec(n_in, hidden, n_out)
    net = Approximator.build(spec, 0)
    assert net.get_params().shape == (spec.n_params,)
    dims = [n_in, *hidden, n_out]
    assert spec.n_params == sum((a + 1) * b for a, b in zip(dims[:-1], dims[1:]))


def test_copy_is_independent():
    net = Approximator.build(ApproximatorSpec(3, (4,), 2), 0)
    twin = net.copy()
    twin.set_params(np.zeros(net.n_params))
    assert np.any(net.get_params() != 0)
