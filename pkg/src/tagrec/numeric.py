"""Dense math and small neural-network kernels.

Everything here works on plain float64 numpy arrays. Matrices are
row-major 2-D arrays; a "dense layer" is a weight matrix of shape
(out, in) plus a bias vector of length out. All routines are
deterministic given their inputs (and the RNG passed in), which the
training code relies on for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NotPositiveDefiniteError, NumericalError

ACTIVATIONS = ("tanh", "relu", "softmax", "identity")


def xavier_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Weight matrix of shape (fan_out, fan_in), entries uniform in
    [-L, L] with L = sqrt(6 / (fan_in + fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"fans must be >= 1, got ({fan_in}, {fan_out})")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def tanh_activation(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax along the last axis, with the max logit subtracted first
    so large logits cannot overflow."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def apply_activation(name: str, x: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return tanh_activation(x)
    if name == "relu":
        return relu(x)
    if name == "softmax":
        return softmax(x)
    if name == "identity":
        return x
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class DenseLayer:
    """Fully connected layer: activation(weights @ x + bias)."""

    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError(
                f"bias length {self.bias.shape} does not match "
                f"weight rows {self.weights.shape[0]}"
            )

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Apply to a single input vector of length `in`."""
        return apply_activation(self.activation, self.weights @ x + self.bias)

    def apply_batch(self, xs: np.ndarray) -> np.ndarray:
        """Apply to a batch of inputs, shape (batch, in) -> (batch, out)."""
        return apply_activation(self.activation, xs @ self.weights.T + self.bias)


CROSS_ENTROPY_FLOOR = 1e-12


def cross_entropy(probs: np.ndarray, true_index: int) -> float:
    """-log of the probability assigned to the true class, floored at
    1e-12 so an exact zero stays finite."""
    probs = np.asarray(probs, dtype=float)
    if abs(float(np.sum(probs)) - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {np.sum(probs)}, expected 1")
    if not 0 <= true_index < probs.shape[-1]:
        raise IndexError(f"true_index {true_index} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(float(probs[true_index]), CROSS_ENTROPY_FLOOR)))


@dataclass
class AdamState:
    """Moment estimates for a list of parameter arrays."""

    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: list[np.ndarray], learning_rate: float = 0.001) -> "AdamState":
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
        )


def adam_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Returns new parameter arrays and
    the advanced state; inputs are not mutated."""
    if len(params) != len(grads):
        raise ValueError("params and grads must have the same length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch: param {p.shape} vs grad {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient in adam_step")
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_params = [], [], []
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_m.append(m)
        new_v.append(v)
        new_params.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
    new_state = AdamState(
        first_moment=new_m,
        second_moment=new_v,
        step_count=t,
        learning_rate=state.learning_rate,
        beta1=b1,
        beta2=b2,
        epsilon=state.epsilon,
    )
    return new_params, new_state


def spd_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A @ X = B for symmetric positive definite A via Cholesky
    factorization (never forms the explicit inverse)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got {A.shape}")
    scale = np.linalg.norm(A)
    if scale > 0 and np.linalg.norm(A - A.T) > 1e-9 * scale:
        raise ValueError("A is not symmetric within 1e-9 relative tolerance")
    try:
        factor = cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix not positive definite") from exc
    return cho_solve(factor, B, check_finite=False)


@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients to central differences."""

    max_relative_error: float
    worst_param: int
    worst_coord: tuple
    n_checked: int
    tolerance: float
    errors: list[float] = field(repr=False, default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def _relative_error(a: float, n: float) -> float:
    denom = abs(a) + abs(n)
    if denom == 0.0:
        return 0.0
    return abs(a - n) / denom


def grad_check(
    loss_and_grad,
    params: list[np.ndarray],
    h: float = 1e-5,
    tolerance: float = 1e-4,
    sample: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Check analytic gradients against central differences.

    `loss_and_grad(params)` must return (loss, grads) with grads a list
    matching `params`. Each checked coordinate is perturbed by +-h and
    the analytic entry compared to (f(p+h) - f(p-h)) / (2h) using the
    symmetric relative error |a - n| / (|a| + |n|). With `sample` set,
    only that many randomly chosen coordinates are checked.
    """
    _, grads = loss_and_grad(params)
    coords = [
        (pi, idx) for pi, p in enumerate(params) for idx in np.ndindex(p.shape)
    ]
    if sample is not None and sample < len(coords):
        rng = np.random.default_rng(seed)
        chosen = rng.choice(len(coords), size=sample, replace=False)
        coords = [coords[int(i)] for i in chosen]
    errors = []
    worst = (0.0, -1, ())
    for pi, idx in coords:
        perturbed = [p.copy() for p in params]
        perturbed[pi][idx] += h
        up, _ = loss_and_grad(perturbed)
        perturbed[pi][idx] -= 2 * h
        down, _ = loss_and_grad(perturbed)
        numeric = (up - down) / (2 * h)
        analytic = float(grads[pi][idx])
        err = _relative_error(analytic, numeric)
        errors.append(err)
        if err > worst[0]:
            worst = (err, pi, idx)
    return GradCheckReport(
        max_relative_error=worst[0],
        worst_param=worst[1],
        worst_coord=worst[2],
        n_checked=len(coords),
        tolerance=tolerance,
        errors=errors,
    )
