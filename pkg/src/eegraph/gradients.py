"""Reverse-mode gradients for the fixed network topology, plus the
finite-difference checker that keeps them honest.

The computation graph never changes shape, so each adjoint is written out
by hand instead of taping operations. Subgradients at the ReLU and
absolute-value kinks are taken as 0. Everything runs in float64.
"""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError
from .graph import SymmetricAdjacency, fold_full_gradient, n_upper
from .losses import convert_labels, domain_loss, kl_loss, l1_penalty
from .model import DomainTrace, ForwardTrace, domain_forward, forward, sample_dropout_mask
from .params import GradientSet, ModelConfig, ParamSet


def _propagation_backward(
    cfg: ModelConfig,
    trace: ForwardTrace,
    g_z: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Push a gradient at the propagated features back to (w_feat, S).

    Walks the hop chain in reverse: each hop contributes an outer product
    to the propagator gradient and routes the rest through S transposed.
    """
    g_h = g_z
    g_prop = np.zeros_like(trace.prop)
    for hop in range(cfg.steps, 0, -1):
        g_prop += np.einsum("bij,bkj->ik", g_h, trace.hidden[hop - 1])
        g_h = np.matmul(trace.prop.T, g_h)
    g_w_feat = np.einsum("bni,bnj->ij", trace.x, g_h)
    return g_w_feat, g_prop


def _propagator_to_adjacency(adj: SymmetricAdjacency, g_prop: np.ndarray) -> np.ndarray:
    """Adjoint of S = D^(-1/2) A D^(-1/2) with D from |A|, packed.

    Each matrix entry feeds S directly and also through its own row's
    degree; the degree path carries the sign of the entry because degrees
    sum absolute values.
    """
    full = adj.full()
    deg = np.abs(full).sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    prop = full * inv_sqrt[:, None] * inv_sqrt[None, :]
    gs = g_prop * prop
    g_deg = -(gs.sum(axis=1) + gs.sum(axis=0)) / (2.0 * deg)
    g_full = g_prop * inv_sqrt[:, None] * inv_sqrt[None, :] + np.sign(full) * g_deg[:, None]
    return fold_full_gradient(g_full)


def l1_subgradient(adj: SymmetricAdjacency, alpha: float) -> np.ndarray:
    """Packed subgradient of the full-matrix absolute sum, 0 at 0."""
    return fold_full_gradient(alpha * np.sign(adj.full()))


def class_backward(
    cfg: ModelConfig,
    params: ParamSet,
    trace: ForwardTrace,
    targets: np.ndarray,
    alpha: float,
) -> GradientSet:
    """Gradient of summed KL to target distributions plus the L1 penalty.

    Touches the adjacency, the feature transform, and the classifier head;
    the domain head slot stays None.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != trace.probs.shape:
        raise ConfigError(f"targets shape {targets.shape} != probs {trace.probs.shape}")
    g_logits = trace.probs - targets
    g_w_class = trace.pooled_drop.T @ g_logits
    g_pooled = g_logits @ params.w_class.T
    if trace.mask is not None:
        g_pooled = g_pooled * trace.mask * trace.keep_scale
    g_relu = np.broadcast_to(g_pooled[:, None, :], trace.relu_z.shape)
    g_z = np.where(trace.z > 0.0, g_relu, 0.0)
    g_w_feat, g_prop = _propagation_backward(cfg, trace, g_z)
    g_adj = _propagator_to_adjacency(params.adj, g_prop)
    g_adj += l1_subgradient(params.adj, alpha)
    return GradientSet(adj=g_adj, w_feat=g_w_feat, w_class=g_w_class, w_dom=None)


def _domain_logit_grad(dom: DomainTrace, domain_index: int) -> np.ndarray:
    g = dom.probs.copy()
    g[..., domain_index] -= 1.0
    return g


def domain_backward(
    cfg: ModelConfig,
    params: ParamSet,
    source: tuple[ForwardTrace, DomainTrace],
    target: tuple[ForwardTrace, DomainTrace],
) -> GradientSet:
    """Gradient of the source/target discrimination loss.

    Both domains share the adjacency and feature transform, so their
    propagator gradients accumulate before the normalization adjoint runs
    once. The classifier head is untouched (zeros).
    """
    if params.w_dom is None:
        raise ConfigError("domain gradients requested without a domain head")
    g_w_dom = np.zeros_like(params.w_dom)
    g_w_feat = np.zeros_like(params.w_feat)
    g_prop = None
    for (trace, dom), domain_index in ((source, 0), (target, 1)):
        g_dlogits = _domain_logit_grad(dom, domain_index)
        if dom.level == "node":
            g_w_dom += np.einsum("bnh,bnk->hk", trace.relu_z, g_dlogits)
            g_relu = g_dlogits @ params.w_dom.T
        else:
            g_w_dom += trace.pooled.T @ g_dlogits
            g_pooled = g_dlogits @ params.w_dom.T
            g_relu = np.broadcast_to(g_pooled[:, None, :], trace.relu_z.shape)
        g_z = np.where(trace.z > 0.0, g_relu, 0.0)
        gw, gp = _propagation_backward(cfg, trace, g_z)
        g_w_feat += gw
        g_prop = gp if g_prop is None else g_prop + gp
    g_adj = _propagator_to_adjacency(params.adj, g_prop)
    return GradientSet(
        adj=g_adj,
        w_feat=g_w_feat,
        w_class=np.zeros_like(params.w_class),
        w_dom=g_w_dom,
    )


# --- finite-difference verification ---------------------------------------

def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def grad_check(
    params: ParamSet,
    loss_fn: Callable[[ParamSet], float],
    grad_fn: Callable[[ParamSet], GradientSet],
    h: float = 1e-5,
    names: Iterable[str] | None = None,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Perturbs every scalar of the selected tensors in place (adjacency
    scalars are the packed triangle parameters, so the finite difference
    moves both mirrored matrix entries, matching what the fold reports).
    """
    analytic = grad_fn(params).tensors()
    tensors = params.tensors()
    selected = list(tensors) if names is None else list(names)
    worst = 0.0
    for name in selected:
        arr = tensors[name]
        ga = analytic[name]
        flat = arr.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn(params)
            flat[i] = orig - h
            down = loss_fn(params)
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            worst = max(worst, relative_error(float(gflat[i]), numeric))
    return worst


def _random_check_instance(cfg: ModelConfig, seed: int, batch: int):
    """One random model + batch pair for the full-model check.

    Adjacency magnitudes stay well away from 0 so the absolute-value kink
    in the degree never sits inside the finite-difference window.
    """
    streams = np.random.SeedSequence(seed).spawn(6)
    rngs = [np.random.default_rng(s) for s in streams]
    mag = rngs[0].uniform(0.3, 1.0, size=n_upper(cfg.n_channels))
    sign = np.where(rngs[0].random(n_upper(cfg.n_channels)) < 0.5, -1.0, 1.0)
    upper = mag * sign
    adj = SymmetricAdjacency(cfg.n_channels, upper)
    full = adj.full()
    np.fill_diagonal(full, 1.0)
    adj = SymmetricAdjacency.from_full(full)
    params = ParamSet(
        adj=adj,
        w_feat=rngs[1].normal(0.0, 0.5, size=(cfg.in_dim, cfg.hidden_dim)),
        w_class=rngs[2].normal(0.0, 0.5, size=(cfg.hidden_dim, cfg.n_classes)),
        w_dom=rngs[3].normal(0.0, 0.5, size=(cfg.hidden_dim, 2)),
    )
    x_src = rngs[4].normal(0.0, 1.0, size=(batch, cfg.n_channels, cfg.in_dim))
    x_tgt = rngs[4].normal(0.0, 1.0, size=(batch, cfg.n_channels, cfg.in_dim))
    labels = rngs[4].integers(0, cfg.n_classes, size=batch)
    mask = sample_dropout_mask(rngs[5], (batch, cfg.hidden_dim), cfg.dropout)
    return params, x_src, x_tgt, labels, mask


def model_grad_check(
    seed: int = 0,
    size: str = "default",
    h: float = 1e-5,
    beta: float = 0.5,
    alpha: float = 0.01,
    epsilon: float = 0.1,
    corrupt: str | None = None,
) -> float:
    """Check the composite training gradients on a random small model.

    Three scalars are differentiated, one per update rule: the classifier
    head against the classification objective, the domain head against the
    domain objective, and the shared parameters against classification
    minus beta times domain. Instances whose pre-activations sit within
    10h of a ReLU kink are redrawn. `corrupt` names a tensor whose
    analytic gradient gets deliberately damaged (negative-control hook).
    """
    if size == "small":
        cfg = ModelConfig(n_channels=3, in_dim=2, hidden_dim=2, n_classes=2, steps=1)
        batch = 2
    elif size == "default":
        cfg = ModelConfig(n_channels=4, in_dim=3, hidden_dim=2, n_classes=3, steps=2)
        batch = 3
    else:
        raise ConfigError(f"unknown check size {size!r}")
    scheme = "seed3" if cfg.n_classes == 3 else cfg.n_classes

    attempt_seed = seed
    for _ in range(50):
        params, x_src, x_tgt, labels, mask = _random_check_instance(cfg, attempt_seed, batch)
        src = forward(cfg, params, x_src, mask=mask)
        tgt = forward(cfg, params, x_tgt)
        near_kink = min(np.abs(src.z).min(), np.abs(tgt.z).min()) < 10.0 * h
        if not near_kink:
            break
        attempt_seed += 1
    else:
        raise ConfigError("could not draw a kink-free instance")

    targets = convert_labels(labels, scheme, epsilon)

    def phi_class(p: ParamSet) -> float:
        tr = forward(cfg, p, x_src, mask=mask)
        return kl_loss(tr.probs, targets) + l1_penalty(p.adj, alpha)

    def phi_domain(p: ParamSet) -> float:
        s = forward(cfg, p, x_src, mask=mask)
        t = forward(cfg, p, x_tgt)
        return domain_loss(domain_forward(p, s, "node").probs, domain_forward(p, t, "node").probs)

    def grads(p: ParamSet) -> tuple[GradientSet, GradientSet]:
        s = forward(cfg, p, x_src, mask=mask)
        t = forward(cfg, p, x_tgt)
        cg = class_backward(cfg, p, s, targets, alpha)
        dg = domain_backward(cfg, p, (s, domain_forward(p, s, "node")), (t, domain_forward(p, t, "node")))
        return cg, dg

    if corrupt is not None and corrupt not in params.tensors():
        raise ConfigError(f"cannot corrupt unknown tensor {corrupt!r}")

    def maybe_corrupt(g: GradientSet) -> GradientSet:
        # the class gradient set has no w_dom slot; skip it there
        if corrupt is not None:
            tensor = g.tensors().get(corrupt)
            if tensor is not None:
                tensor += 1e-2
        return g

    worst = 0.0
    worst = max(
        worst,
        grad_check(
            params,
            phi_class,
            lambda p: maybe_corrupt(grads(p)[0]),
            h=h,
            names=["w_class"],
        ),
    )
    worst = max(
        worst,
        grad_check(
            params,
            phi_domain,
            lambda p: maybe_corrupt(grads(p)[1]),
            h=h,
            names=["w_dom"],
        ),
    )

    def phi_shared(p: ParamSet) -> float:
        return phi_class(p) - beta * phi_domain(p)

    def shared_grads(p: ParamSet) -> GradientSet:
        cg, dg = grads(p)
        return maybe_corrupt(
            GradientSet(
                adj=cg.adj - beta * dg.adj,
                w_feat=cg.w_feat - beta * dg.w_feat,
                w_class=cg.w_class,
                w_dom=dg.w_dom,
            )
        )

    worst = max(worst, grad_check(params, phi_shared, shared_grads, h=h, names=["adj", "w_feat"]))
    return worst
