"""Exact O(n^2) t-SNE with CSV and SVG export."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import DomainError
from ..numkit import make_rng

log = logging.getLogger(__name__)

P_FLOOR = 1e-12


@dataclass
class TsneResult:
    coords: np.ndarray
    kl: float
    kl_history: dict[int, float] = field(default_factory=dict)
    betas: np.ndarray | None = None


def squared_distances(X: np.ndarray) -> np.ndarray:
    sq = (X * X).sum(axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def joint_probabilities(X: np.ndarray, perplexity: float, tol: float = 1e-5, max_iter: int = 200):
    cond, betas = kernels.perplexity_search(np.ascontiguousarray(squared_distances(X)),
                                            float(perplexity), tol, max_iter)
    P = (cond + cond.T) / (2.0 * X.shape[0])
    return np.maximum(P, P_FLOOR), betas


def _q_matrix(Y: np.ndarray):
    num = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    return num, np.maximum(num / num.sum(), P_FLOOR)


def kl_divergence(Y: np.ndarray, P: np.ndarray) -> float:
    _, Q = _q_matrix(Y)
    mask = ~np.eye(len(Y), dtype=bool)
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def kl_gradient(Y: np.ndarray, P: np.ndarray) -> np.ndarray:
    """dKL/dy_i = 4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2)."""
    num, Q = _q_matrix(Y)
    W = (P - Q) * num
    np.fill_diagonal(W, 0.0)
    return 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)


def tsne(X, perplexity: float = 30.0, n_iter: int = 1000, seed: int = 0, learning_rate: float = 200.0,
         exaggeration: float = 12.0, exaggeration_iters: int = 250, record_every: int = 50) -> TsneResult:
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n <= 3 * perplexity:
        raise DomainError(f"t-SNE needs n > 3 * perplexity ({n} <= {3 * perplexity})")
    rng = make_rng(seed)
    if len(np.unique(X, axis=0)) < n:
        log.info("duplicate points found; adding 1e-10 jitter")
        X = X + 1e-10 * rng.standard_normal(X.shape)
    P, betas = joint_probabilities(X, perplexity)
    Y = 1e-2 * rng.standard_normal((n, 2))
    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    history: dict[int, float] = {}
    for it in range(n_iter):
        early = it < exaggeration_iters
        momentum = 0.5 if early else 0.8
        grad = kl_gradient(Y, P * exaggeration if early else P)
        same = np.sign(grad) == np.sign(velocity)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        velocity = momentum * velocity - learning_rate * gains * grad
        Y = Y + velocity
        Y -= Y.mean(axis=0)
        done = it + 1
        if done == exaggeration_iters or done % record_every == 0 or done == n_iter:
            history[done] = kl_divergence(Y, P)
    return TsneResult(Y, kl_divergence(Y, P), history, betas)


def write_csv(path, stay_ids, coords, labels) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["stay_id", "x", "y", "label"])
        for sid, (x, y), lab in zip(stay_ids, coords, labels):
            w.writerow([sid, repr(float(x)), repr(float(y)), int(lab)])


COLORS = {0: "#1f77b4", 1: "#d62728"}


def write_svg(path, coords, labels, title: str = "", size: int = 480, pad: int = 24) -> None:
    """Minimal standalone scatter plot, one circle per point coloured by label."""
    coords = np.asarray(coords, dtype=np.float64)
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    xy = pad + (coords - lo) / span * (size - 2 * pad)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    if title:
        parts.append(f'<text x="{pad}" y="{pad - 8}" font-family="sans-serif" font-size="12">{title}</text>')
    for (x, y), lab in zip(xy, labels):
        parts.append(f'<circle cx="{x:.2f}" cy="{size - y:.2f}" r="2.5" '
                     f'fill="{COLORS.get(int(lab), "#7f7f7f")}" fill-opacity="0.7"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
