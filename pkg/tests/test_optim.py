"""Adam stepping, decay scope, and divergence detection."""
import numpy as np
import pytest

from eegraph.errors import ConfigError, DivergenceError
from eegraph.gradients import l1_subgradient
from eegraph.graph import SymmetricAdjacency
from eegraph.model import init_params
from eegraph.optim import AdamConfig, AdamState, adam_step
from eegraph.params import GradientSet, ModelConfig

CFG = ModelConfig(n_channels=4, in_dim=3, hidden_dim=3, n_classes=2, steps=1)


def fresh(seed=0, domain_head=True):
    rng = np.random.default_rng(seed)
    full = rng.uniform(0.3, 1.0, size=(4, 4))
    full = (full + full.T) / 2
    np.fill_diagonal(full, 1.0)
    params = init_params(
        CFG, None, seed, domain_head=domain_head, adj=SymmetricAdjacency.from_full(full)
    )
    return params


def grad_like(params, fill=0.0, rng=None):
    g = GradientSet.zeros_like(params)
    for arr in g.tensors().values():
        if rng is not None:
            arr += rng.normal(size=arr.shape)
        else:
            arr += fill
    return g


def test_config_validation():
    with pytest.raises(ConfigError):
        AdamConfig(lr=0.0)
    with pytest.raises(ConfigError):
        AdamConfig(beta1=1.0)
    with pytest.raises(ConfigError):
        AdamConfig(beta2=-0.1)
    with pytest.raises(ConfigError):
        AdamConfig(weight_decay=-1e-9)
    AdamConfig(beta1=0.0, beta2=0.0, eps=0.0)


def test_state_tracks_every_tensor():
    params = fresh()
    state = AdamState.for_params(params)
    assert set(state.m) == {"adj", "w_feat", "w_class", "w_dom"}
    assert state.t == 0
    no_dom = fresh(domain_head=False)
    assert set(AdamState.for_params(no_dom).m) == {"adj", "w_feat", "w_class"}


def test_sign_descent_mode():
    # zero moments and zero eps reduce the update to lr * sign(direction)
    params = fresh(1)
    before = {k: v.copy() for k, v in params.tensors().items()}
    state = AdamState.for_params(params, AdamConfig(lr=0.05, beta1=0.0, beta2=0.0, eps=0.0))
    rng = np.random.default_rng(2)
    g = grad_like(params, rng=rng)
    adam_step(state, params, g)
    for name, arr in params.tensors().items():
        assert np.allclose(arr, before[name] - 0.05 * np.sign(g.tensors()[name]), atol=1e-12)


def test_first_step_scalar_value():
    params = fresh(3)
    cfg = AdamConfig(lr=0.01)
    state = AdamState.for_params(params, cfg)
    g = grad_like(params, fill=0.0)
    g.w_feat[0, 0] = 2.0
    before = params.w_feat[0, 0]
    adam_step(state, params, g)
    # bias correction makes the first step lr * g / (|g| + eps)
    expect = before - cfg.lr * 2.0 / (2.0 + cfg.eps)
    assert params.w_feat[0, 0] == pytest.approx(expect, rel=1e-12)
    assert state.t == 1


def test_moment_recursion_two_steps():
    params = fresh(4)
    cfg = AdamConfig(lr=0.1, beta1=0.9, beta2=0.99, eps=1e-8)
    state = AdamState.for_params(params, cfg)
    g1, g2 = 1.0, -0.5
    x = params.w_class[0, 0]
    for g in (g1, g2):
        d = grad_like(params, fill=0.0)
        d.w_class[0, 0] = g
        adam_step(state, params, d)
    m = 0.9 * (0.1 * g1) + 0.1 * g2
    v = 0.99 * (0.01 * g1 * g1) + 0.01 * g2 * g2
    m1_hat = (0.1 * g1) / (1 - 0.9)
    v1_hat = (0.01 * g1 * g1) / (1 - 0.99)
    x -= cfg.lr * m1_hat / (np.sqrt(v1_hat) + cfg.eps)
    x -= cfg.lr * (m / (1 - 0.9**2)) / (np.sqrt(v / (1 - 0.99**2)) + cfg.eps)
    assert params.w_class[0, 0] == pytest.approx(x, rel=1e-12)


def test_weight_decay_skips_adjacency():
    params = fresh(5)
    before = {k: v.copy() for k, v in params.tensors().items()}
    cfg = AdamConfig(lr=0.1, weight_decay=0.5)
    state = AdamState.for_params(params, cfg)
    adam_step(state, params, grad_like(params, fill=0.0))
    # zero directions: moments stay zero, so only the decay moves anything
    assert np.array_equal(params.adj.upper, before["adj"])
    for name in ("w_feat", "w_class", "w_dom"):
        assert np.allclose(params.tensors()[name], before[name] * (1 - 0.1 * 0.5), atol=1e-15)


def test_decay_applies_to_prestep_value():
    params = fresh(6)
    cfg = AdamConfig(lr=0.1, weight_decay=0.2, beta1=0.0, beta2=0.0, eps=0.0)
    state = AdamState.for_params(params, cfg)
    before = params.w_feat[0, 0]
    d = grad_like(params, fill=0.0)
    d.w_feat[0, 0] = 3.0
    adam_step(state, params, d)
    assert params.w_feat[0, 0] == pytest.approx(before * (1 - 0.1 * 0.2) - 0.1, rel=1e-12)


def test_quadratic_convergence():
    params = fresh(7)
    target = 0.0
    state = AdamState.for_params(params, AdamConfig(lr=0.05))
    for _ in range(400):
        d = grad_like(params, fill=0.0)
        d.w_feat[:] = 2.0 * (params.w_feat - target)
        adam_step(state, params, d)
    assert np.abs(params.w_feat).max() < 1e-3


def test_l1_direction_shrinks_adjacency_monotonically():
    # pure sparsity pressure pulls every weight toward zero without crossing
    params = fresh(8, domain_head=False)
    state = AdamState.for_params(params, AdamConfig(lr=1e-3))
    prev = np.abs(params.adj.upper).copy()
    signs = np.sign(params.adj.upper).copy()
    for _ in range(100):
        d = GradientSet.zeros_like(params)
        d.adj[:] = l1_subgradient(params.adj, 0.1)
        adam_step(state, params, d)
        mag = np.abs(params.adj.upper)
        assert (mag <= prev + 1e-15).all()
        assert (np.sign(params.adj.upper) == signs).all()
        prev = mag


def test_nonfinite_direction_raises_and_names_tensor():
    params = fresh(9)
    state = AdamState.for_params(params)
    d = grad_like(params, fill=0.0)
    d.w_dom[0, 0] = np.nan
    with pytest.raises(DivergenceError) as exc:
        adam_step(state, params, d)
    assert "w_dom" in str(exc.value)
    assert state.t == 0


def test_nonfinite_check_runs_before_any_mutation():
    params = fresh(10)
    before = {k: v.copy() for k, v in params.tensors().items()}
    state = AdamState.for_params(params)
    d = grad_like(params, fill=1.0)
    d.w_dom[0, 0] = np.inf
    with pytest.raises(DivergenceError):
        adam_step(state, params, d)
    for name, arr in params.tensors().items():
        assert np.array_equal(arr, before[name])


def test_missing_direction_rejected():
    params = fresh(11, domain_head=True)
    state = AdamState.for_params(params)
    d = GradientSet.zeros_like(params)
    d.w_dom = None
    with pytest.raises(ConfigError):
        adam_step(state, params, d)
