"""Trainable fusion head with explicit analytic backpropagation.

Architecture: batch normalization over the CNN embedding segment,
concatenation with the (already per-extractor normalized) traditional
features, one relu hidden layer, and a 10-way linear output.  Everything
is computed in float64; gradients are hand-derived and verified against
central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, GradCheckError

N_CLASSES = 10

ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-7

BN_MOMENTUM = 0.9
# small enough that normalized variance sits within 1e-6 of 1 for O(1)-
# variance features; safe in float64
BN_EPSILON = 1e-8


@dataclass
class BatchNormParams:
    dim: int
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    epsilon: float = BN_EPSILON

    @classmethod
    def identity(cls, dim: int) -> "BatchNormParams":
        return cls(
            dim=dim,
            gamma=np.ones(dim),
            beta=np.zeros(dim),
            running_mean=np.zeros(dim),
            running_var=np.ones(dim),
        )


@dataclass
class DenseParams:
    in_dim: int
    out_dim: int
    weights: np.ndarray  # out_dim x in_dim
    bias: np.ndarray  # out_dim

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "DenseParams":
        # seeded uniform scaled by 1/sqrt(in_dim); biases zero
        bound = 1.0 / np.sqrt(in_dim) if in_dim > 0 else 0.0
        return cls(
            in_dim=in_dim,
            out_dim=out_dim,
            weights=rng.uniform(-bound, bound, size=(out_dim, in_dim)),
            bias=np.zeros(out_dim),
        )


@dataclass
class FusionHeadParams:
    """The only trainable state: cnn-segment batchnorm plus two dense layers."""

    cnn_bn: BatchNormParams
    hidden: DenseParams
    output: DenseParams

    @property
    def cnn_dim(self) -> int:
        return self.cnn_bn.dim

    @property
    def trad_dim(self) -> int:
        return self.hidden.in_dim - self.cnn_bn.dim

    def param_count(self) -> int:
        return (
            2 * self.cnn_bn.dim
            + self.hidden.weights.size
            + self.hidden.bias.size
            + self.output.weights.size
            + self.output.bias.size
        )


def init_fusion_head(
    cnn_dim: int, trad_dim: int, hidden_units: int, rng: np.random.Generator
) -> FusionHeadParams:
    if cnn_dim < 1 or trad_dim < 0 or hidden_units < 1:
        raise ContractError(
            f"bad head dims: cnn={cnn_dim}, trad={trad_dim}, hidden={hidden_units}"
        )
    return FusionHeadParams(
        cnn_bn=BatchNormParams.identity(cnn_dim),
        hidden=DenseParams.init(cnn_dim + trad_dim, hidden_units, rng),
        output=DenseParams.init(hidden_units, N_CLASSES, rng),
    )


def batchnorm_apply(
    params: BatchNormParams, batch: np.ndarray, mode: str
) -> tuple[np.ndarray, dict]:
    """Normalize a batch; train mode also updates the running statistics.

    Train mode normalizes by the batch mean and biased batch variance and
    folds them into the running statistics as
    ``running = momentum * running + (1 - momentum) * batch_stat``.
    Infer mode normalizes by the running statistics alone.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != params.dim:
        raise ContractError(
            f"batchnorm expects (B, {params.dim}) input, got {batch.shape}"
        )
    if mode == "train":
        if batch.shape[0] < 2:
            raise ContractError("batchnorm train mode needs a batch of at least 2 rows")
        mean = batch.mean(axis=0)
        var = batch.var(axis=0)  # biased
        params.running_mean = params.momentum * params.running_mean + (1.0 - params.momentum) * mean
        params.running_var = params.momentum * params.running_var + (1.0 - params.momentum) * var
    elif mode == "infer":
        mean = params.running_mean
        var = params.running_var
    else:
        raise ContractError(f"batchnorm mode must be 'train' or 'infer', got {mode!r}")
    inv_std = 1.0 / np.sqrt(var + params.epsilon)
    x_hat = (batch - mean) * inv_std
    out = params.gamma * x_hat + params.beta
    cache = {"mode": mode, "x_hat": x_hat, "inv_std": inv_std, "gamma": params.gamma}
    return out, cache


def batchnorm_backward(cache: dict, d_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (d_input, d_gamma, d_beta) for one batchnorm application."""
    x_hat, inv_std, gamma = cache["x_hat"], cache["inv_std"], cache["gamma"]
    if d_out.shape != x_hat.shape:
        raise ContractError(
            f"batchnorm backward shape mismatch: {d_out.shape} vs {x_hat.shape}"
        )
    d_gamma = (d_out * x_hat).sum(axis=0)
    d_beta = d_out.sum(axis=0)
    d_xhat = d_out * gamma
    if cache["mode"] == "train":
        b = x_hat.shape[0]
        d_x = (inv_std / b) * (
            b * d_xhat - d_xhat.sum(axis=0) - x_hat * (d_xhat * x_hat).sum(axis=0)
        )
    else:
        d_x = d_xhat * inv_std
    return d_x, d_gamma, d_beta


def dense_forward(params: DenseParams, batch: np.ndarray) -> np.ndarray:
    """``batch @ weights.T + bias`` with shape checking."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != params.in_dim:
        raise ContractError(f"dense expects (B, {params.in_dim}) input, got {batch.shape}")
    return batch @ params.weights.T + params.bias


def softmax_xent(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of a max-subtracted softmax, plus its logit gradient."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ContractError(f"logits must be 2-d, got shape {logits.shape}")
    b, n_classes = logits.shape
    if labels.shape != (b,):
        raise ContractError(f"labels must have shape ({b},), got {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ContractError(f"labels must lie in [0, {n_classes})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    rows = np.arange(b)
    loss = float(-np.log(probs[rows, labels]).mean())
    d_logits = probs.copy()
    d_logits[rows, labels] -= 1.0
    return loss, d_logits / b


def head_forward(
    head: FusionHeadParams, cnn_batch: np.ndarray, trad_batch: np.ndarray, mode: str
) -> tuple[np.ndarray, dict]:
    """logits = output(relu(hidden(concat(batchnorm(cnn), trad))))."""
    cnn_batch = np.asarray(cnn_batch, dtype=np.float64)
    trad_batch = np.asarray(trad_batch, dtype=np.float64)
    if cnn_batch.ndim != 2 or cnn_batch.shape[1] != head.cnn_dim:
        raise ContractError(
            f"cnn segment must be (B, {head.cnn_dim}), got {cnn_batch.shape}"
        )
    if trad_batch.ndim != 2 or trad_batch.shape[1] != head.trad_dim:
        raise ContractError(
            f"traditional segment must be (B, {head.trad_dim}), got {trad_batch.shape}"
        )
    if cnn_batch.shape[0] != trad_batch.shape[0]:
        raise ContractError(
            f"segment batch sizes differ: cnn {cnn_batch.shape[0]}, "
            f"traditional {trad_batch.shape[0]}"
        )
    bn_out, bn_cache = batchnorm_apply(head.cnn_bn, cnn_batch, mode)
    fused = np.concatenate([bn_out, trad_batch], axis=1)
    pre_act = dense_forward(head.hidden, fused)
    hidden_out = np.maximum(pre_act, 0.0)
    logits = dense_forward(head.output, hidden_out)
    cache = {
        "head": head,
        "bn_cache": bn_cache,
        "fused": fused,
        "pre_act": pre_act,
        "hidden_out": hidden_out,
    }
    return logits, cache


def head_backward(cache: dict, d_logits: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic parameter gradients for a matching head_forward call.

    Returns arrays keyed like ``head_param_dict``; the gradient with
    respect to the raw cnn input is included as ``d_cnn_input``.
    """
    head: FusionHeadParams = cache["head"]
    hidden_out = cache["hidden_out"]
    d_logits = np.asarray(d_logits, dtype=np.float64)
    if d_logits.shape != (hidden_out.shape[0], head.output.out_dim):
        raise ContractError(
            f"d_logits must be {(hidden_out.shape[0], head.output.out_dim)}, "
            f"got {d_logits.shape}"
        )
    d_out_w = d_logits.T @ hidden_out
    d_out_b = d_logits.sum(axis=0)
    d_hidden_out = d_logits @ head.output.weights
    d_pre = d_hidden_out * (cache["pre_act"] > 0.0)
    d_hidden_w = d_pre.T @ cache["fused"]
    d_hidden_b = d_pre.sum(axis=0)
    d_fused = d_pre @ head.hidden.weights
    d_bn_out = d_fused[:, : head.cnn_dim]
    d_cnn, d_gamma, d_beta = batchnorm_backward(cache["bn_cache"], d_bn_out)
    return {
        "bn.gamma": d_gamma,
        "bn.beta": d_beta,
        "hidden.weights": d_hidden_w,
        "hidden.bias": d_hidden_b,
        "output.weights": d_out_w,
        "output.bias": d_out_b,
        "d_cnn_input": d_cnn,
    }


def head_param_dict(head: FusionHeadParams) -> dict[str, np.ndarray]:
    return {
        "bn.gamma": head.cnn_bn.gamma,
        "bn.beta": head.cnn_bn.beta,
        "hidden.weights": head.hidden.weights,
        "hidden.bias": head.hidden.bias,
        "output.weights": head.output.weights,
        "output.bias": head.output.bias,
    }


def set_head_params(head: FusionHeadParams, params: dict[str, np.ndarray]) -> None:
    head.cnn_bn.gamma = params["bn.gamma"]
    head.cnn_bn.beta = params["bn.beta"]
    head.hidden.weights = params["hidden.weights"]
    head.hidden.bias = params["hidden.bias"]
    head.output.weights = params["output.weights"]
    head.output.bias = params["output.bias"]


@dataclass
class AdamState:
    """Optimizer state over a named collection of parameter arrays."""

    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    lr: float = ADAM_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def init(
        cls,
        params: dict[str, np.ndarray],
        lr: float = ADAM_LR,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        epsilon: float = ADAM_EPSILON,
    ) -> "AdamState":
        return cls(
            step=0,
            m={k: np.zeros_like(np.asarray(p, dtype=np.float64)) for k, p in params.items()},
            v={k: np.zeros_like(np.asarray(p, dtype=np.float64)) for k, p in params.items()},
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )


def adam_step(
    state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns fresh params and state."""
    if set(params) != set(state.m):
        raise ContractError("parameter names do not match optimizer state")
    step = state.step + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for key, p in params.items():
        if key not in grads:
            raise ContractError(f"missing gradient for {key!r}")
        g = np.asarray(grads[key], dtype=np.float64)
        if g.shape != np.asarray(p).shape:
            raise ContractError(
                f"gradient shape {g.shape} does not match parameter {key!r} "
                f"shape {np.asarray(p).shape}"
            )
        m = state.beta1 * state.m[key] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[key] + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**step)
        v_hat = v / (1.0 - state.beta2**step)
        new_params[key] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        new_m[key] = m
        new_v[key] = v
    return new_params, AdamState(
        step=step,
        m=new_m,
        v=new_v,
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
    )


def grad_check(f, analytic_grad: np.ndarray, point: np.ndarray, h: float) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps a parameter vector to a scalar; the relative error per
    coordinate is ``|a - n| / max(|a|, |n|, 1e-12)``.
    """
    if h <= 0.0:
        raise GradCheckError(f"step size must be positive, got {h}")
    point = np.asarray(point, dtype=np.float64)
    analytic_grad = np.asarray(analytic_grad, dtype=np.float64)
    if analytic_grad.shape != point.shape:
        raise GradCheckError(
            f"analytic gradient shape {analytic_grad.shape} does not match "
            f"point shape {point.shape}"
        )
    worst = 0.0
    flat_point = point.ravel()
    flat_grad = analytic_grad.ravel()
    for i in range(flat_point.size):
        shifted = flat_point.copy()
        shifted[i] = flat_point[i] + h
        f_plus = float(f(shifted.reshape(point.shape)))
        shifted[i] = flat_point[i] - h
        f_minus = float(f(shifted.reshape(point.shape)))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise GradCheckError(f"non-finite evaluation at coordinate {i}")
        numeric = (f_plus - f_minus) / (2.0 * h)
        denom = max(abs(flat_grad[i]), abs(numeric), 1e-12)
        worst = max(worst, abs(flat_grad[i] - numeric) / denom)
    return worst
