"""Gradient checks for the tensor core plus network/checkpoint behavior.

Every differentiable primitive is compared against central finite
differences in float64. The full 100-instance sweep lives in the
acceptance suite; these are smaller seeded spot checks plus the edge
cases (ties, clip boundaries, broadcasting) that sweeps can miss.
"""

from __future__ import annotations

import math
import struct

import numpy as np
import pytest

from grasplab.errors import ShapeMismatch, SpecMismatch, UnsupportedResolution
from grasplab.nn.checkpoint import MAGIC, load_checkpoint, save_checkpoint, spec_hash
from grasplab.nn.network import (
    LOG_STD_INIT,
    GaussianPolicy,
    NetworkSpec,
    arch_preset,
    forward,
    forward_np,
    gaussian_entropy,
    gaussian_log_prob,
    gaussian_log_prob_np,
    gaussian_sample,
    init_params,
    vector_spec,
)
from grasplab.nn.tensor import Tensor, parameter

H = 1e-6
TOL = 1e-5


def fd_grad(f, x: np.ndarray, h: float = H) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to array x."""
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def check_grad(build, *arrays: np.ndarray) -> None:
    """Compare backward() against finite differences for every input.

    ``build`` maps one Tensor per array to a scalar Tensor. Arrays must be
    float64; each is checked in turn while the others stay fixed.
    """
    leaves = [parameter(a.copy()) for a in arrays]
    out = build(*leaves)
    out.backward()
    for i, a in enumerate(arrays):
        def f(x: np.ndarray, i: int = i) -> float:
            args = [Tensor(arr.copy()) for arr in arrays]
            args[i] = Tensor(x)
            return float(build(*args).data)

        numeric = fd_grad(f, a)
        analytic = leaves[i].grad
        assert analytic is not None, f"input {i} received no gradient"
        scale = max(float(np.abs(numeric).max()), 1.0)
        err = float(np.abs(analytic - numeric).max()) / scale
        assert err < TOL, f"input {i}: rel err {err:.3e}"


def arr(rng: np.random.Generator, *shape: int, lo: float = -1.0, hi: float = 1.0):
    return rng.uniform(lo, hi, size=shape)


def weighted(rng: np.random.Generator, shape) -> Tensor:
    """Fixed random weights that make a non-scalar output scalar."""
    return Tensor(rng.standard_normal(shape))


# -- primitive gradients ------------------------------------------------------------


def test_grad_add_sub_neg():
    rng = np.random.default_rng(0)
    for _ in range(3):
        a, b = arr(rng, 3, 4), arr(rng, 3, 4)
        w = weighted(rng, (3, 4))
        check_grad(lambda x, y: ((x + y) * w).sum(), a, b)
        check_grad(lambda x, y: ((x - y) * w).sum(), a, b)
        check_grad(lambda x: ((-x) * w).sum(), a)


def test_grad_add_broadcast():
    rng = np.random.default_rng(1)
    a, b = arr(rng, 3, 1), arr(rng, 1, 4)
    w = weighted(rng, (3, 4))
    check_grad(lambda x, y: ((x + y) * w).sum(), a, b)
    row = arr(rng, 4)
    m = arr(rng, 3, 4)
    check_grad(lambda x, y: ((x + y) * w).sum(), m, row)


def test_grad_mul_div_pow():
    rng = np.random.default_rng(2)
    for _ in range(3):
        a = arr(rng, 2, 5)
        b = arr(rng, 2, 5, lo=0.5, hi=2.0)  # denominator away from zero
        w = weighted(rng, (2, 5))
        check_grad(lambda x, y: ((x * y) * w).sum(), a, b)
        check_grad(lambda x, y: ((x / y) * w).sum(), a, b)
        base = arr(rng, 2, 5, lo=0.5, hi=2.0)
        check_grad(lambda x: ((x**3.0) * w).sum(), base)
        check_grad(lambda x: ((x**0.5) * w).sum(), base)


def test_grad_matmul():
    rng = np.random.default_rng(3)
    a, b = arr(rng, 4, 3), arr(rng, 3, 5)
    w = weighted(rng, (4, 5))
    check_grad(lambda x, y: ((x @ y) * w).sum(), a, b)


def test_grad_exp_log_tanh():
    rng = np.random.default_rng(4)
    a = arr(rng, 3, 3)
    pos = arr(rng, 3, 3, lo=0.2, hi=3.0)
    w = weighted(rng, (3, 3))
    check_grad(lambda x: (x.exp() * w).sum(), a)
    check_grad(lambda x: (x.log() * w).sum(), pos)
    check_grad(lambda x: (x.tanh() * w).sum(), a)


def test_grad_relu_away_from_kink():
    rng = np.random.default_rng(5)
    a = arr(rng, 4, 4)
    a[np.abs(a) < 0.05] = 0.1  # keep finite differences off the kink
    w = weighted(rng, (4, 4))
    check_grad(lambda x: (x.relu() * w).sum(), a)


def test_relu_gradient_zero_at_origin():
    x = parameter(np.array([0.0, -1.0, 2.0]))
    x.relu().sum().backward()
    assert np.array_equal(x.grad, [0.0, 0.0, 1.0])


def test_grad_minimum():
    rng = np.random.default_rng(6)
    a, b = arr(rng, 3, 4), arr(rng, 3, 4)
    gap = np.abs(a - b) < 0.05
    a[gap] += 0.2  # keep the min selection stable under the FD step
    w = weighted(rng, (3, 4))
    check_grad(lambda x, y: (x.minimum(y) * w).sum(), a, b)


def test_minimum_tie_routes_gradient_to_self():
    x = parameter(np.array([1.0, 2.0]))
    y = parameter(np.array([1.0, 5.0]))
    x.minimum(y).sum().backward()
    assert np.array_equal(x.grad, [1.0, 1.0])
    assert np.array_equal(y.grad, [0.0, 0.0])


def test_grad_clip_interior():
    rng = np.random.default_rng(7)
    a = arr(rng, 3, 4, lo=-2.0, hi=2.0)
    a[np.abs(np.abs(a) - 1.0) < 0.05] = 0.5  # stay off the clip edges
    w = weighted(rng, (3, 4))
    check_grad(lambda x: (x.clip(-1.0, 1.0) * w).sum(), a)


def test_clip_boundary_passes_gradient():
    x = parameter(np.array([-1.0, -1.5, 0.3, 1.0, 1.5]))
    x.clip(-1.0, 1.0).sum().backward()
    assert np.array_equal(x.grad, [1.0, 0.0, 1.0, 1.0, 0.0])


def test_grad_reductions_and_shape_ops():
    rng = np.random.default_rng(8)
    a = arr(rng, 2, 3, 4)
    w0 = weighted(rng, (3, 4))
    w1 = weighted(rng, (2, 12))
    check_grad(lambda x: x.sum(), a)
    check_grad(lambda x: (x.sum(axis=0) * w0).sum(), a)
    check_grad(lambda x: (x.sum(axis=1, keepdims=True) * weighted(
        np.random.default_rng(80), (2, 1, 4))).sum(), a)
    check_grad(lambda x: x.mean(), a)
    check_grad(lambda x: (x.mean(axis=2) * weighted(
        np.random.default_rng(81), (2, 3))).sum(), a)
    check_grad(lambda x: (x.reshape(6, 4) * weighted(
        np.random.default_rng(82), (6, 4))).sum(), a)
    check_grad(lambda x: (x.flatten_batch() * w1).sum(), a)


def test_grad_concat_cols():
    rng = np.random.default_rng(9)
    a, b = arr(rng, 3, 2), arr(rng, 3, 4)
    w = weighted(rng, (3, 6))
    check_grad(lambda x, y: (x.concat_cols(y) * w).sum(), a, b)
    with pytest.raises(ShapeMismatch):
        Tensor(np.zeros(3)).concat_cols(Tensor(np.zeros((3, 1))))


def test_grad_conv2d():
    rng = np.random.default_rng(10)
    x = arr(rng, 2, 2, 5, 5)
    w = arr(rng, 3, 2, 2, 2)
    b = arr(rng, 3)
    wt = weighted(rng, (2, 3, 2, 2))
    check_grad(lambda xx, ww, bb: (xx.conv2d(ww, bb, 2) * wt).sum(), x, w, b)


def test_conv2d_shape_validation():
    x = Tensor(np.zeros((1, 2, 8, 8)))
    w_bad_c = parameter(np.zeros((4, 3, 2, 2)))
    w_big = parameter(np.zeros((4, 2, 9, 9)))
    b = parameter(np.zeros(4))
    with pytest.raises(ShapeMismatch):
        x.conv2d(w_bad_c, b, 1)
    with pytest.raises(ShapeMismatch):
        x.conv2d(w_big, b, 1)
    with pytest.raises(ShapeMismatch):
        Tensor(np.zeros((2, 8, 8))).conv2d(w_big, b, 1)


def test_grad_reused_node_accumulates():
    # x feeds two branches; gradients from both must sum.
    rng = np.random.default_rng(11)
    a = arr(rng, 3)
    check_grad(lambda x: (x * x).sum() + x.sum() * 2.0, a)


def test_backward_needs_scalar_or_seed():
    x = parameter(np.ones(3))
    y = x * 2.0
    with pytest.raises(ShapeMismatch):
        y.backward()
    y.backward(np.array([1.0, 10.0, 100.0]))
    assert np.array_equal(x.grad, [2.0, 20.0, 200.0])


def test_float32_graph_stays_float32():
    x = parameter(np.ones((2, 2), dtype=np.float32))
    y = ((x * 2.0 + 1.0).tanh() ** 2.0).mean()
    assert y.dtype == np.float32
    y.backward()
    assert x.grad.dtype == np.float32


# -- gaussian densities -------------------------------------------------------------


def test_gaussian_log_prob_standard_normal_closed_form():
    mean = Tensor(np.zeros((1, 1)))
    log_std = Tensor(np.zeros(1))
    logp = gaussian_log_prob(np.zeros((1, 1)), mean, log_std)
    assert logp.data[0] == pytest.approx(-0.9189385332046727, abs=1e-15)
    np_logp = gaussian_log_prob_np(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1))
    assert np_logp[0] == pytest.approx(-0.9189385332046727, abs=1e-15)


def test_gaussian_entropy_closed_form():
    ent = gaussian_entropy(Tensor(np.zeros(1)))
    assert float(ent.data) == pytest.approx(1.4189385332046727, abs=1e-15)
    # Entropy adds log-std across dimensions.
    ent3 = gaussian_entropy(Tensor(np.log([0.5, 1.0, 2.0])))
    expected = 3 * 1.4189385332046727 + math.log(0.5) + math.log(2.0)
    assert float(ent3.data) == pytest.approx(expected, abs=1e-12)


def test_gaussian_log_prob_matches_dense_formula():
    rng = np.random.default_rng(12)
    actions = rng.standard_normal((6, 3))
    mean = rng.standard_normal((6, 3))
    log_std = rng.uniform(-1.0, 0.5, size=3)
    got = gaussian_log_prob_np(actions, mean, log_std)
    std = np.exp(log_std)
    want = (
        -0.5 * (((actions - mean) / std) ** 2).sum(axis=1)
        - np.log(std).sum()
        - 1.5 * math.log(2.0 * math.pi)
    )
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    tensor = gaussian_log_prob(actions, Tensor(mean), Tensor(log_std))
    np.testing.assert_allclose(tensor.data, want, rtol=0, atol=1e-12)


def test_grad_gaussian_log_prob_and_entropy():
    rng = np.random.default_rng(13)
    actions = rng.standard_normal((4, 2))
    mean0 = rng.standard_normal((4, 2))
    log_std0 = rng.uniform(-0.5, 0.5, size=2)
    w = weighted(rng, (4,))
    check_grad(
        lambda m, ls: (gaussian_log_prob(actions, m, ls) * w).sum(), mean0, log_std0
    )
    check_grad(lambda ls: gaussian_entropy(ls), log_std0)


def test_gaussian_sample_deterministic_per_state():
    mean = np.zeros((2, 3))
    log_std = np.log(np.full(3, 2.0))
    a1 = gaussian_sample(mean, log_std, np.random.default_rng(7))
    a2 = gaussian_sample(mean, log_std, np.random.default_rng(7))
    np.testing.assert_array_equal(a1, a2)
    noise = np.random.default_rng(7).standard_normal((2, 3))
    np.testing.assert_allclose(a1, 2.0 * noise, rtol=0, atol=0)


# -- specs, presets, init -----------------------------------------------------------


def test_preset_feature_dims():
    assert arch_preset(32).feature_dim() == 8 * 4 * 4
    assert arch_preset(80).feature_dim() == 32 * 8 * 8
    assert arch_preset(128).feature_dim() == 64 * 13 * 13
    assert arch_preset(256).feature_dim() == 72 * 28 * 28
    assert vector_spec(7).feature_dim() == 7


def test_preset_forward_shapes():
    for res, channels in ((32, 1), (32, 4), (80, 1)):
        spec = arch_preset(res, channels=channels, action_dim=4, hidden=(16,))
        params = init_params(spec, np.random.default_rng(0))
        batch = np.random.default_rng(1).standard_normal(
            (2, channels, res, res)
        ).astype(np.float32)
        mean, value = forward_np(spec, params, batch)
        assert mean.shape == (2, 4)
        assert value.shape == (2,)


def test_unsupported_resolution():
    with pytest.raises(UnsupportedResolution):
        arch_preset(64)


def test_spec_validation():
    with pytest.raises(ShapeMismatch):
        NetworkSpec(input_shape=(1, 32))
    with pytest.raises(ShapeMismatch):
        vector_spec(4, action_dim=0)
    with pytest.raises(ShapeMismatch):
        NetworkSpec(input_shape=(3,), hidden=())
    with pytest.raises(ShapeMismatch):
        NetworkSpec(
            input_shape=(3,), conv_layers=arch_preset(32).conv_layers
        )
    with pytest.raises(ShapeMismatch):
        # 8x8 kernel cannot fit in a 4x4 image
        NetworkSpec(input_shape=(1, 4, 4), conv_layers=arch_preset(80).conv_layers)


def test_canonical_json_stable_and_distinct():
    a = arch_preset(32)
    b = arch_preset(32)
    assert a.canonical_json() == b.canonical_json()
    assert spec_hash(a) == spec_hash(b)
    c = arch_preset(32, hidden=(128,))
    assert a.canonical_json() != c.canonical_json()
    assert spec_hash(a) != spec_hash(c)


def test_init_distribution_and_determinism():
    spec = vector_spec(400, action_dim=2, hidden=(300,))
    params = init_params(spec, np.random.default_rng(42))
    w = params["dense0.w"].data
    bound = math.sqrt(3.0 / 400)
    assert w.shape == (400, 300)
    assert np.abs(w).max() <= bound
    assert abs(float(w.mean())) < 1e-3
    assert float(w.var()) == pytest.approx(bound * bound / 3.0, rel=0.05)
    assert np.all(params["dense0.b"].data == 0.0)
    assert np.all(params["mean.b"].data == 0.0)
    assert np.all(params["value.b"].data == 0.0)
    np.testing.assert_array_equal(
        params["log_std"].data, np.full(2, LOG_STD_INIT, dtype=np.float32)
    )
    again = init_params(spec, np.random.default_rng(42))
    for name in params:
        np.testing.assert_array_equal(params[name].data, again[name].data)
    assert params["dense0.w"].data.dtype == np.float32
    f64 = init_params(spec, np.random.default_rng(42), dtype=np.float64)
    assert f64["dense0.w"].data.dtype == np.float64


def test_forward_matches_forward_np():
    for spec in (vector_spec(6, hidden=(8, 8)), arch_preset(32, hidden=(16,))):
        params = init_params(spec, np.random.default_rng(3))
        shape = (3,) + spec.input_shape
        batch = np.random.default_rng(4).standard_normal(shape).astype(np.float32)
        mean_t, log_std_t, value_t = forward(spec, params, batch)
        mean_n, value_n = forward_np(spec, params, batch)
        np.testing.assert_allclose(mean_t.data, mean_n, rtol=0, atol=1e-6)
        np.testing.assert_allclose(value_t.data[:, 0], value_n, rtol=0, atol=1e-6)
        np.testing.assert_array_equal(log_std_t.data, params["log_std"].data)


def test_forward_rejects_wrong_batch_shape():
    spec = vector_spec(5)
    params = init_params(spec, np.random.default_rng(0))
    with pytest.raises(ShapeMismatch):
        forward_np(spec, params, np.zeros((2, 4)))


# -- policy wrapper -----------------------------------------------------------------


def test_policy_act_deterministic_returns_mean():
    spec = vector_spec(4, action_dim=3)
    policy = GaussianPolicy(spec, seed=5)
    obs = np.random.default_rng(6).standard_normal(4).astype(np.float32)
    rng = np.random.default_rng(0)
    action, logp, value = policy.act(obs, rng, deterministic=True)
    mean, val = forward_np(spec, policy.params, obs[None, ...])
    np.testing.assert_allclose(action, mean[0], rtol=0, atol=0)
    assert action.dtype == np.float64
    assert value == pytest.approx(float(val[0]))
    want_logp = gaussian_log_prob_np(
        mean, mean, policy.params["log_std"].data
    )[0]
    assert logp == pytest.approx(float(want_logp))


def test_policy_act_sampling_reproducible():
    spec = vector_spec(4, action_dim=3)
    policy = GaussianPolicy(spec, seed=5)
    obs = np.zeros(4, dtype=np.float32)
    a1, logp1, _ = policy.act(obs, np.random.default_rng(9))
    a2, logp2, _ = policy.act(obs, np.random.default_rng(9))
    np.testing.assert_array_equal(a1, a2)
    assert logp1 == logp2
    a3, _, _ = policy.act(obs, np.random.default_rng(10))
    assert not np.array_equal(a1, a3)


def test_policy_evaluate_matches_act_logp():
    spec = vector_spec(3, action_dim=2)
    policy = GaussianPolicy(spec, seed=1)
    rng = np.random.default_rng(2)
    obs = rng.standard_normal((5, 3)).astype(np.float32)
    actions = rng.standard_normal((5, 2)).astype(np.float32)
    logp, entropy, value, mean = policy.evaluate(obs, actions)
    want = gaussian_log_prob_np(
        actions,
        forward_np(spec, policy.params, obs)[0],
        policy.params["log_std"].data,
    )
    np.testing.assert_allclose(logp.data, want, rtol=0, atol=1e-6)
    assert value.data.shape == (5, 1)
    assert mean.data.shape == (5, 2)
    assert entropy.data.size == 1


def test_grad_policy_evaluate_full_network():
    """FD check through the whole vector policy in double precision."""
    spec = vector_spec(3, action_dim=2, hidden=(4,))
    rng = np.random.default_rng(21)
    obs = rng.standard_normal((2, 3))
    actions = rng.standard_normal((2, 2))

    base = init_params(spec, rng, dtype=np.float64)
    names = list(base)
    flats = {k: v.data.copy() for k, v in base.items()}

    def loss_from(params):
        policy = GaussianPolicy(spec, params=params)
        logp, entropy, value, _ = policy.evaluate(obs, actions)
        return logp.sum() + entropy * 0.1 + value.sum() * 0.01

    policy = GaussianPolicy(spec, params={k: parameter(v.copy()) for k, v in flats.items()})
    out = loss_from(policy.params)
    out.backward()
    for name in names:
        def f(x: np.ndarray, name: str = name) -> float:
            trial = {k: parameter(v.copy()) for k, v in flats.items()}
            trial[name] = parameter(x)
            return float(loss_from(trial).data)

        numeric = fd_grad(f, flats[name])
        analytic = policy.params[name].grad
        scale = max(float(np.abs(numeric).max()), 1.0)
        assert float(np.abs(analytic - numeric).max()) / scale < TOL, name


def test_flat_param_round_trip():
    spec = vector_spec(3, action_dim=2, hidden=(4,))
    policy = GaussianPolicy(spec, seed=0)
    flat = policy.flat_params()
    total = sum(p.data.size for p in policy.params.values())
    assert flat.shape == (total,)
    policy.set_flat_params(flat * 2.0)
    np.testing.assert_allclose(policy.flat_params(), flat * 2.0, rtol=0, atol=1e-6)
    with pytest.raises(ShapeMismatch):
        policy.set_flat_params(flat[:-1])
    policy.zero_grads()
    assert np.array_equal(policy.flat_grads(), np.zeros(total))


# -- checkpoints --------------------------------------------------------------------


def test_checkpoint_round_trip_bits(tmp_path):
    spec = arch_preset(32, hidden=(8,))
    params = init_params(spec, np.random.default_rng(0))
    params["value.w"].data = params["value.w"].data.astype(np.float64)
    path = str(tmp_path / "p.bin")
    save_checkpoint(path, spec, params)
    loaded = load_checkpoint(path, spec)
    assert list(loaded) == list(params)
    for name in params:
        assert loaded[name].data.dtype == params[name].data.dtype
        assert loaded[name].data.tobytes() == params[name].data.tobytes()
        assert loaded[name].requires_grad


def test_checkpoint_save_is_deterministic(tmp_path):
    spec = vector_spec(3)
    params = init_params(spec, np.random.default_rng(1))
    p1, p2 = str(tmp_path / "a.bin"), str(tmp_path / "b.bin")
    save_checkpoint(p1, spec, params)
    save_checkpoint(p2, spec, params)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def _corrupt(path: str, out: str, mutate) -> str:
    blob = bytearray(open(path, "rb").read())
    mutate(blob)
    with open(out, "wb") as f:
        f.write(blob)
    return out


def test_checkpoint_rejects_corruption(tmp_path):
    spec = vector_spec(3)
    params = init_params(spec, np.random.default_rng(1))
    good = str(tmp_path / "good.bin")
    save_checkpoint(good, spec, params)

    def set_magic(b):
        b[0:4] = b"XXXX"

    def set_version(b):
        b[4:8] = struct.pack("<I", 99)

    def flip_hash(b):
        b[8] ^= 0xFF

    def bad_dtype(b):
        (name_len,) = struct.unpack_from("<H", b, 44)
        b[44 + 2 + name_len] = 7

    def trailing(b):
        b.extend(b"\x00")

    for mutate in (set_magic, set_version, bad_dtype, trailing):
        bad = _corrupt(good, str(tmp_path / "bad.bin"), mutate)
        with pytest.raises(SpecMismatch):
            load_checkpoint(bad, spec)
    hashed = _corrupt(good, str(tmp_path / "hash.bin"), flip_hash)
    with pytest.raises(SpecMismatch):
        load_checkpoint(hashed, spec)
    # Without an expected spec the fingerprint is not enforced.
    loaded = load_checkpoint(hashed)
    assert list(loaded) == list(params)


def test_checkpoint_wrong_architecture(tmp_path):
    spec = vector_spec(3)
    other = vector_spec(4)
    params = init_params(spec, np.random.default_rng(1))
    path = str(tmp_path / "p.bin")
    save_checkpoint(path, spec, params)
    with pytest.raises(SpecMismatch):
        load_checkpoint(path, other)


def test_checkpoint_rejects_unsupported_dtype(tmp_path):
    spec = vector_spec(3)
    params = init_params(spec, np.random.default_rng(1))
    params["mean.b"].data = params["mean.b"].data.astype(np.float16)
    with pytest.raises(SpecMismatch):
        save_checkpoint(str(tmp_path / "p.bin"), spec, params)


def test_checkpoint_magic_constant():
    assert MAGIC == b"GLCK"
