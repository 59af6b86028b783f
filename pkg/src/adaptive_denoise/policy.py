"""Recurrent control policy: LSTM trunk, per-knob 3-way action heads,
REINFORCE gradients by backpropagation through time, and Adam.

Everything is plain numpy (float64) so gradients can be checked against
finite differences and training stays bitwise reproducible.  Gate layout
in the stacked weight matrices is (input, forget, candidate, output).
"""

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .enhancer import N_PARAMS, PARAM_HIGH, PARAM_LOW, PARAM_STEP, ParameterSet

N_ACTIONS = 3  # decrease / hold / increase
DEFAULT_HIDDEN_SIZE = 196
DEFAULT_INIT_SCALE = 0.08
DEFAULT_FORGET_BIAS = 1.0

_CHECKPOINT_MAGIC = b"ADNCKPT1"
_CHECKPOINT_VERSION = 1


def _sigmoid(x):
    # tanh form avoids exp overflow for large negative inputs
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class PolicyParameters:
    """LSTM weights plus one (3 x H) softmax head per control parameter.

    Also doubles as the container for gradients, which have the same
    shapes.
    """

    w_x: np.ndarray  # (4H, D_in)
    w_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)
    head_w: np.ndarray  # (P, 3, H)
    head_b: np.ndarray  # (P, 3)

    @property
    def hidden_size(self):
        return self.w_h.shape[1]

    @property
    def input_dim(self):
        return self.w_x.shape[1]

    @property
    def n_heads(self):
        return self.head_w.shape[0]

    def copy(self) -> "PolicyParameters":
        return PolicyParameters(
            self.w_x.copy(), self.w_h.copy(), self.b.copy(),
            self.head_w.copy(), self.head_b.copy(),
        )


@dataclass
class HiddenState:
    h: np.ndarray
    c: np.ndarray


def zero_hidden(hidden_size: int) -> HiddenState:
    return HiddenState(np.zeros(hidden_size), np.zeros(hidden_size))


def init_policy(
    input_dim: int,
    hidden_size: int = DEFAULT_HIDDEN_SIZE,
    n_heads: int = N_PARAMS,
    rng: np.random.Generator | None = None,
    init_scale: float = DEFAULT_INIT_SCALE,
    forget_bias: float = DEFAULT_FORGET_BIAS,
    hold_bias: float = 0.0,
) -> PolicyParameters:
    """Uniform(-init_scale, init_scale) matrices, zero biases, and a
    positive forget-gate bias to stabilize long episodes.

    hold_bias > 0 tilts every head toward "no change" at initialization so
    an untrained policy keeps the knobs near their starting point instead
    of random-walking them across their ranges.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    h = hidden_size
    theta = PolicyParameters(
        w_x=rng.uniform(-init_scale, init_scale, size=(4 * h, input_dim)),
        w_h=rng.uniform(-init_scale, init_scale, size=(4 * h, h)),
        b=np.zeros(4 * h),
        head_w=rng.uniform(-init_scale, init_scale, size=(n_heads, N_ACTIONS, h)),
        head_b=np.zeros((n_heads, N_ACTIONS)),
    )
    theta.b[h : 2 * h] = forget_bias
    theta.head_b[:, 1] = hold_bias
    return theta


def zero_like(theta: PolicyParameters) -> PolicyParameters:
    return PolicyParameters(
        np.zeros_like(theta.w_x), np.zeros_like(theta.w_h), np.zeros_like(theta.b),
        np.zeros_like(theta.head_w), np.zeros_like(theta.head_b),
    )


def lstm_step(
    theta: PolicyParameters, x: np.ndarray, state: HiddenState
) -> HiddenState:
    """Standard LSTM cell update."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (theta.input_dim,):
        raise ValueError(f"expected input of shape ({theta.input_dim},), got {x.shape}")
    hsz = theta.hidden_size
    z = theta.w_x @ x + theta.w_h @ state.h + theta.b
    i = _sigmoid(z[:hsz])
    f = _sigmoid(z[hsz : 2 * hsz])
    g = np.tanh(z[2 * hsz : 3 * hsz])
    o = _sigmoid(z[3 * hsz :])
    c = f * state.c + i * g
    h = o * np.tanh(c)
    return HiddenState(h, c)


def action_distribution(theta: PolicyParameters, h: np.ndarray) -> np.ndarray:
    """Per-head softmax over (decrease, hold, increase); shape (P, 3)."""
    logits = np.einsum("pah,h->pa", theta.head_w, h) + theta.head_b
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def sample_action(dist: np.ndarray, rng: np.random.Generator):
    """Independent categorical draw per head.

    Returns (choices, log_prob): choices in {-1, 0, +1} per head and the
    summed log-probability of the drawn combination.
    """
    dist = np.asarray(dist)
    u = rng.random(dist.shape[0])
    cdf = np.cumsum(dist, axis=1)
    idx = np.minimum((cdf < u[:, None]).sum(axis=1), N_ACTIONS - 1)
    log_prob = float(np.sum(np.log(dist[np.arange(dist.shape[0]), idx])))
    return idx - 1, log_prob


def greedy_action(dist: np.ndarray) -> np.ndarray:
    """Most likely choice per head (ties resolved toward 'decrease')."""
    return np.asarray(dist).argmax(axis=1) - 1


def apply_action(params: ParameterSet, action) -> ParameterSet:
    """Move each knob by choice * step, clamped to its bounds."""
    choices = np.asarray(action, dtype=np.float64)
    if choices.shape != (N_PARAMS,):
        raise ValueError(f"expected {N_PARAMS} choices, got shape {choices.shape}")
    moved = np.clip(params.as_array() + choices * PARAM_STEP, PARAM_LOW, PARAM_HIGH)
    return ParameterSet.from_array(moved)


def returns_to_go(rewards, discount: float = 1.0) -> np.ndarray:
    """Suffix sums R_t = sum_{t' >= t} discount^(t'-t) * r_t'.

    The default (discount 1) is the plain undiscounted return-to-go; a
    discount below 1 shortens the credit horizon, which suits this task
    since a knob change mostly affects the frame it is applied to.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    if discount == 1.0:
        return np.cumsum(rewards[::-1])[::-1].copy()
    out = np.empty_like(rewards)
    acc = 0.0
    for t in range(rewards.shape[0] - 1, -1, -1):
        acc = rewards[t] + discount * acc
        out[t] = acc
    return out


# ---------------------------------------------------------------------------
# episode forward / backward
# ---------------------------------------------------------------------------


def _forward_episode(theta: PolicyParameters, inputs: np.ndarray):
    """Run the LSTM over a whole episode, caching everything the backward
    pass needs.  inputs has shape (T, D_in)."""
    hsz = theta.hidden_size
    T = inputs.shape[0]
    cache = {
        "i": np.empty((T, hsz)), "f": np.empty((T, hsz)),
        "g": np.empty((T, hsz)), "o": np.empty((T, hsz)),
        "c": np.empty((T, hsz)), "h": np.empty((T, hsz)),
        "h_prev": np.empty((T, hsz)), "c_prev": np.empty((T, hsz)),
        "probs": np.empty((T, theta.n_heads, N_ACTIONS)),
    }
    state = zero_hidden(hsz)
    for t in range(T):
        cache["h_prev"][t] = state.h
        cache["c_prev"][t] = state.c
        z = theta.w_x @ inputs[t] + theta.w_h @ state.h + theta.b
        i = _sigmoid(z[:hsz])
        f = _sigmoid(z[hsz : 2 * hsz])
        g = np.tanh(z[2 * hsz : 3 * hsz])
        o = _sigmoid(z[3 * hsz :])
        c = f * state.c + i * g
        h = o * np.tanh(c)
        cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t] = i, f, g, o
        cache["c"][t], cache["h"][t] = c, h
        cache["probs"][t] = action_distribution(theta, h)
        state = HiddenState(h, c)
    return cache


def _action_indices(actions) -> np.ndarray:
    idx = np.asarray(actions, dtype=np.int64) + 1
    if idx.min() < 0 or idx.max() > N_ACTIONS - 1:
        raise ValueError("action choices must lie in {-1, 0, +1}")
    return idx


def surrogate_objective(theta, inputs, actions, advantages) -> float:
    """The REINFORCE surrogate sum_t log pi(a_t) * advantage_t, evaluated
    by a plain forward pass (used by the finite-difference oracle)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    idx = _action_indices(actions)
    advantages = np.asarray(advantages, dtype=np.float64)
    cache = _forward_episode(theta, inputs)
    T, P = idx.shape
    logp = np.log(cache["probs"][np.arange(T)[:, None], np.arange(P)[None, :], idx])
    return float(np.sum(logp.sum(axis=1) * advantages))


def reinforce_gradient(
    theta: PolicyParameters, inputs, actions, rewards, baseline,
    discount: float = 1.0,
) -> PolicyParameters:
    """Gradient of sum_t log pi(a_t) * (R_t - b_t) by full-episode BPTT.

    R_t is the return-to-go of `rewards` (undiscounted by default); the
    result is the ascent direction on the expected-return objective.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    idx = _action_indices(actions)
    rewards = np.asarray(rewards, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    T = inputs.shape[0]
    if not (idx.shape[0] == rewards.shape[0] == baseline.shape[0] == T):
        raise ValueError(
            "inputs, actions, rewards and baseline must have equal lengths"
        )
    advantages = returns_to_go(rewards, discount) - baseline

    cache = _forward_episode(theta, inputs)
    grad = zero_like(theta)
    hsz = theta.hidden_size
    P = theta.n_heads

    dh_next = np.zeros(hsz)
    dc_next = np.zeros(hsz)
    head_range = np.arange(P)
    for t in range(T - 1, -1, -1):
        probs = cache["probs"][t]
        dlogits = -advantages[t] * probs
        dlogits[head_range, idx[t]] += advantages[t]

        h = cache["h"][t]
        grad.head_w += dlogits[:, :, None] * h[None, None, :]
        grad.head_b += dlogits
        dh = np.einsum("pah,pa->h", theta.head_w, dlogits) + dh_next

        i, f, g, o = cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t]
        c, c_prev = cache["c"][t], cache["c_prev"][t]
        tc = np.tanh(c)
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ]
        )
        grad.w_x += np.outer(dz, inputs[t])
        grad.w_h += np.outer(dz, cache["h_prev"][t])
        grad.b += dz
        dh_next = theta.w_h.T @ dz
        dc_next = dc * f
    return grad


# ---------------------------------------------------------------------------
# flattening, clipping, Adam
# ---------------------------------------------------------------------------


def flatten_params(theta: PolicyParameters) -> np.ndarray:
    return np.concatenate(
        [theta.w_x.ravel(), theta.w_h.ravel(), theta.b.ravel(),
         theta.head_w.ravel(), theta.head_b.ravel()]
    )


def unflatten_params(vec: np.ndarray, template: PolicyParameters) -> PolicyParameters:
    out = []
    offset = 0
    for arr in (template.w_x, template.w_h, template.b,
                template.head_w, template.head_b):
        out.append(vec[offset : offset + arr.size].reshape(arr.shape).copy())
        offset += arr.size
    if offset != vec.size:
        raise ValueError(f"flat vector of size {vec.size}, expected {offset}")
    return PolicyParameters(*out)


def global_norm(grad: PolicyParameters) -> float:
    return float(np.linalg.norm(flatten_params(grad)))


def clip_global_norm(grad: PolicyParameters, max_norm: float):
    """Scale the gradient so its global L2 norm is at most max_norm.

    Returns (clipped gradient, pre-clip norm).
    """
    norm = global_norm(grad)
    if norm <= max_norm or norm == 0.0:
        return grad, norm
    scale = max_norm / norm
    return PolicyParameters(
        grad.w_x * scale, grad.w_h * scale, grad.b * scale,
        grad.head_w * scale, grad.head_b * scale,
    ), norm


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_adam(theta: PolicyParameters, learning_rate: float = 1e-3, **kwargs) -> AdamState:
    n = flatten_params(theta).size
    return AdamState(np.zeros(n), np.zeros(n), 0, learning_rate, **kwargs)


def adam_update(
    theta: PolicyParameters, grad: PolicyParameters, opt: AdamState
) -> tuple[PolicyParameters, AdamState]:
    """One bias-corrected Adam descent step on the supplied gradient.

    Rejects non-finite gradients without touching theta or the optimizer
    state.
    """
    g = flatten_params(grad)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient; update rejected")
    t = opt.step_count + 1
    m = opt.beta1 * opt.first_moment + (1.0 - opt.beta1) * g
    v = opt.beta2 * opt.second_moment + (1.0 - opt.beta2) * g * g
    m_hat = m / (1.0 - opt.beta1**t)
    v_hat = v / (1.0 - opt.beta2**t)
    new_flat = flatten_params(theta) - opt.learning_rate * m_hat / (np.sqrt(v_hat) + opt.epsilon)
    new_theta = unflatten_params(new_flat, theta)
    new_opt = replace(opt, first_moment=m, second_moment=v, step_count=t)
    return new_theta, new_opt


# ---------------------------------------------------------------------------
# checkpoint serialization (versioned, little-endian, byte-deterministic)
# ---------------------------------------------------------------------------

_ARRAY_FIELDS = ("w_x", "w_h", "b", "head_w", "head_b")


def save_checkpoint(
    path,
    theta: PolicyParameters,
    opt: AdamState | None = None,
    config: dict | None = None,
) -> None:
    """Write weights, optimizer state and config as one binary document.

    Layout: 8-byte magic, uint32 header length, JSON header (sorted keys),
    then raw little-endian float64 buffers in header order.  Identical
    inputs produce identical bytes.
    """
    arrays = [(name, getattr(theta, name)) for name in _ARRAY_FIELDS]
    adam_meta = None
    if opt is not None:
        arrays.append(("adam_first_moment", opt.first_moment))
        arrays.append(("adam_second_moment", opt.second_moment))
        adam_meta = {
            "step_count": opt.step_count,
            "learning_rate": opt.learning_rate,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "epsilon": opt.epsilon,
        }
    header = {
        "format_version": _CHECKPOINT_VERSION,
        "config": config or {},
        "adam": adam_meta,
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (theta, adam_state_or_None, config)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a policy checkpoint (bad magic)")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("format_version") != _CHECKPOINT_VERSION:
            raise ValueError(
                f"{path}: unsupported checkpoint version {header.get('format_version')}"
            )
        data = {}
        for meta in header["arrays"]:
            shape = tuple(meta["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path}: truncated checkpoint")
            data[meta["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(
                np.float64
            )
    theta = PolicyParameters(*[data[name] for name in _ARRAY_FIELDS])
    opt = None
    if header.get("adam") is not None:
        meta = header["adam"]
        opt = AdamState(
            first_moment=data["adam_first_moment"],
            second_moment=data["adam_second_moment"],
            step_count=int(meta["step_count"]),
            learning_rate=float(meta["learning_rate"]),
            beta1=float(meta["beta1"]),
            beta2=float(meta["beta2"]),
            epsilon=float(meta["epsilon"]),
        )
    return theta, opt, header.get("config", {})
