"""Dense numerics shared by every model: parameters, activations, losses,
optimizers and a finite-difference gradient checker.

Matrices are plain 2-D ``float64`` numpy arrays. Random numbers come from
``numpy.random.Generator`` on top of the PCG64 bit generator (PCG-XSL-RR
128/64, multiplier 0x2360ed051fc65da44385df649fccf645), whose output stream
is fixed by the seed on every platform.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, TrainingError

DTYPE = np.float64
BCE_EPS = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; never falls back to global state."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seeds(master_seed: int, n: int) -> list[int]:
    """``n`` reproducible 32-bit child seeds from one master seed."""
    state = np.random.SeedSequence(int(master_seed)).generate_state(n, dtype=np.uint32)
    return [int(s) for s in state]


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    r = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_out, fan_in))


class ParamStore:
    """Named parameter slots, each paired with a same-shape gradient buffer."""

    def __init__(self):
        self.params: "OrderedDict[str, np.ndarray]" = OrderedDict()
        self.grads: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def add(self, name: str, value) -> np.ndarray:
        if name in self.params:
            raise KeyError(f"duplicate parameter slot {name!r}")
        arr = np.array(value, dtype=DTYPE)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for k, v in self.params.items():
            out.add(k, v.copy())
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict) -> None:
        for k, v in state.items():
            v = np.asarray(v, dtype=DTYPE)
            if k not in self.params:
                raise KeyError(f"unknown parameter slot {k!r}")
            if v.shape != self.params[k].shape:
                raise DimensionError(f"slot {k!r}: expected {self.params[k].shape}, got {v.shape}")
            self.params[k][...] = v

    def n_values(self) -> int:
        return sum(v.size for v in self.params.values())


def affine(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``x @ W.T + b`` for a batch of row vectors ``x``."""
    x = np.asarray(x, dtype=DTYPE)
    W = np.asarray(W, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if x.ndim != 2 or W.ndim != 2 or x.shape[1] != W.shape[1]:
        raise DimensionError(f"affine: x{x.shape} incompatible with W{W.shape}")
    if b.shape not in ((W.shape[0],), (1, W.shape[0])):
        raise DimensionError(f"affine: bias{b.shape} incompatible with W{W.shape}")
    return x @ W.T + b.reshape(1, -1)


def affine_backward(dout, x, W, dW=None, db=None):
    """Return ``dx``; accumulate into ``dW``/``db`` when given."""
    if dW is not None:
        dW += dout.T @ x
    if db is not None:
        db += dout.sum(axis=0).reshape(db.shape)
    return dout @ W


def sigmoid(x):
    """Logistic function; uses ``exp(x)/(1+exp(x))`` for negative inputs."""
    x = np.asarray(x, dtype=DTYPE)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def sigmoid_grad(s):
    """Derivative expressed through the sigmoid output ``s``."""
    return s * (1.0 - s)


def tanh_grad(t):
    return 1.0 - t * t


def binary_cross_entropy(y_hat, y) -> float | np.ndarray:
    y_arr = np.asarray(y, dtype=DTYPE)
    if not np.all((y_arr == 0) | (y_arr == 1)):
        raise DomainError(f"labels must be 0 or 1, got {np.unique(y_arr)}")
    p = np.clip(np.asarray(y_hat, dtype=DTYPE), BCE_EPS, 1.0 - BCE_EPS)
    loss = -(y_arr * np.log(p) + (1.0 - y_arr) * np.log1p(-p))
    return float(loss) if loss.ndim == 0 else loss


def bce_with_logit_grad(logit, y):
    """Gradient of BCE(sigmoid(logit), y) with respect to the logit."""
    return sigmoid(logit) - y


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, target: int) -> float:
    logits = np.asarray(logits, dtype=DTYPE).ravel()
    if not 0 <= target < logits.size:
        raise DomainError(f"target {target} out of range for {logits.size} classes")
    return float(-log_softmax(logits)[target])


def _check_finite(store: ParamStore) -> None:
    for name, g in store.grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in slot {name!r}")


def sgd_step(store: ParamStore, lr: float) -> None:
    _check_finite(store)
    for name, p in store.params.items():
        if lr:
            p -= lr * store.grads[name]
    store.zero_grad()


class Sgd:
    def __init__(self, store: ParamStore, lr: float = 1e-4):
        self.store = store
        self.lr = lr

    def step(self) -> None:
        sgd_step(self.store, self.lr)


class Adam:
    def __init__(self, store: ParamStore, lr: float = 1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.store = store
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in store.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in store.params.items()}
        self.t = 0

    def step(self) -> None:
        _check_finite(self.store)
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in self.store.params.items():
            g = self.store.grads[name]
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.lr:
                p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        self.store.zero_grad()


def make_optimizer(name: str, store: ParamStore, lr: float):
    if name == "sgd":
        return Sgd(store, lr)
    if name == "adam":
        return Adam(store, lr)
    raise ValueError(f"unknown optimizer {name!r}")


@dataclass
class GradCheckReport:
    max_rel_error: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4

    @property
    def flagged(self) -> list[str]:
        return [k for k, v in self.max_rel_error.items() if not v < self.tol]

    @property
    def ok(self) -> bool:
        return not self.flagged

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)


def grad_check(loss_and_grad, store: ParamStore, eps: float = 1e-4, tol: float = 1e-4,
               floor: float = 1e-6, slots=None, max_entries=None,
               rng: np.random.Generator | None = None) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    ``loss_and_grad(store)`` must return the scalar loss and accumulate the
    analytic gradient into ``store.grads``. The relative error of an entry is
    ``|a - n| / max(|a|, |n|, floor)``. ``max_entries`` caps the number of
    entries probed per slot (sampled with ``rng``).
    """
    store.zero_grad()
    loss_and_grad(store)
    analytic = {k: g.copy() for k, g in store.grads.items()}
    store.zero_grad()
    report = GradCheckReport(tol=tol)
    for name in slots or store.names():
        p = store.params[name]
        flat = p.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = (rng or make_rng(0)).choice(flat.size, size=max_entries, replace=False)
        a_flat = analytic[name].reshape(-1)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = loss_and_grad(store)
            flat[i] = orig - eps
            f_minus = loss_and_grad(store)
            flat[i] = orig
            num = (f_plus - f_minus) / (2.0 * eps)
            a = a_flat[i]
            err = abs(a - num) / max(abs(a), abs(num), floor)
            worst = max(worst, err)
        store.zero_grad()
        report.max_rel_error[name] = float(worst)
    return report
