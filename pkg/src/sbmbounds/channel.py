"""Information and error-matrix functions of the per-node observation channel.

For a label X drawn from the whitened embedding, the channel emits an
erasure-channel output (X itself with probability alpha) and a Gaussian
output y = sqrt(S) X + N with N standard normal. The two quantities
computed here are the mutual information between X and the pair of outputs
(in nats) and the expected posterior covariance matrix.

With the erasure channel the decomposition

    info(S, alpha)  = alpha * H(p) + (1 - alpha) * info(S, 0)
    mmse(S, alpha)  = (1 - alpha) * mmse(S, 0)

is exact, so only the Gaussian part is ever integrated numerically: by
Monte Carlo with common random numbers (`channel_moments`) or, for label
dimension at most 2, by deterministic Gauss-Hermite quadrature
(`channel_moments_quadrature`).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .labels import CommunityModel
from .linalg import clip_eigenvalues, psd_sqrt, symmetrize
from .seeding import spawn_rng

DEFAULT_MC_SAMPLES = 200_000
_QUAD_NODES_1D = 160
_QUAD_NODES_2D = 64


@dataclass(frozen=True)
class ChannelMoments:
    """Mutual information (nats), posterior-covariance matrix, and MC error."""

    info: float
    mmse: np.ndarray
    info_stderr: float
    samples: int


def _component_means(S, model: CommunityModel) -> np.ndarray:
    """Rows are sqrt(S) mu_a for each community a."""
    dim = model.k - 1
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape != (dim, dim):
        raise ValueError(f"S must be {dim}x{dim}, got {S.shape}")
    return model.mu @ psd_sqrt(S)


def _log_posterior_parts(y, means, log_p):
    """Shifted log-likelihoods and normalizer; the common -|y|^2/2 is dropped."""
    L = y @ means.T - 0.5 * np.sum(means * means, axis=1)[None, :]
    ll = log_p[None, :] + L
    mx = ll.max(axis=1, keepdims=True)
    lse = mx[:, 0] + np.log(np.exp(ll - mx).sum(axis=1))
    return L, ll, lse


def posterior_weights(y, revealed, S, model: CommunityModel) -> np.ndarray:
    """Exact posterior over the k communities given one node's observations.

    `revealed` is the community index when the erasure channel fired, else
    None. Weights are proportional to p_a * exp(-|y - sqrt(S) mu_a|^2 / 2),
    computed with max-subtraction.
    """
    if revealed is not None:
        w = np.zeros(model.k)
        w[int(revealed)] = 1.0
        return w
    y = np.asarray(y, dtype=float).reshape(1, -1)
    if not np.all(np.isfinite(y)):
        raise ValueError("observation vector contains non-finite entries")
    means = _component_means(S, model)
    _, ll, _ = _log_posterior_parts(y, means, np.log(model.p))
    w = np.exp(ll[0] - ll[0].max())
    return w / w.sum()


def posterior_weights_batch(Y, revealed_mask, revealed_labels, S,
                            model: CommunityModel) -> np.ndarray:
    """Vectorized posterior_weights over n nodes; returns an n x k matrix.

    `Y` may be None when no Gaussian output was observed (prior weights for
    unrevealed nodes).
    """
    revealed_mask = np.asarray(revealed_mask, dtype=bool)
    n = revealed_mask.shape[0]
    if Y is None:
        W = np.tile(model.p, (n, 1))
    else:
        Y = np.asarray(Y, dtype=float)
        if not np.all(np.isfinite(Y)):
            raise ValueError("observation matrix contains non-finite entries")
        means = _component_means(S, model)
        _, ll, _ = _log_posterior_parts(Y, means, np.log(model.p))
        W = np.exp(ll - ll.max(axis=1, keepdims=True))
        W /= W.sum(axis=1, keepdims=True)
    if revealed_mask.any():
        idx = np.flatnonzero(revealed_mask)
        W[idx] = 0.0
        W[idx, np.asarray(revealed_labels)[idx]] = 1.0
    return W


def moment_samples(S, model: CommunityModel, n_mc: int, seed: int):
    """Per-sample information values and posterior statistics, with CRN.

    Draws (community, noise) pairs that depend only on (seed, n_mc, shape),
    never on S, so calls at different S with the same seed share random
    numbers. Returns (v, w, m): information integrand per sample, posterior
    weights (n_mc x k), and posterior means (n_mc x (k-1)).
    """
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    rng = spawn_rng(seed, "channel-mc")
    a = rng.choice(model.k, size=n_mc, p=model.p)
    z = rng.standard_normal((n_mc, model.k - 1))
    means = _component_means(S, model)
    y = means[a] + z
    L, ll, lse = _log_posterior_parts(y, means, np.log(model.p))
    v = L[np.arange(n_mc), a] - lse
    w = np.exp(ll - ll.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    m = w @ model.mu
    return v, w, m


def _mix_erasure(info_g, mmse_g, stderr_g, alpha, model, samples, slack):
    H = model.entropy()
    info = alpha * H + (1.0 - alpha) * info_g
    if info < -1e-9 - slack or info > H + 1e-6 + slack:
        raise ArithmeticError(
            f"information estimate {info:.6g} outside [0, H={H:.6g}] "
            f"beyond tolerance")
    info = min(max(info, 0.0), H)
    mmse = clip_eigenvalues((1.0 - alpha) * symmetrize(mmse_g), 0.0, 1.0)
    return ChannelMoments(info=info, mmse=mmse,
                          info_stderr=(1.0 - alpha) * stderr_g,
                          samples=samples)


def channel_moments(S, alpha, model: CommunityModel,
                    n_mc: int = DEFAULT_MC_SAMPLES, seed: int = 0) -> ChannelMoments:
    """Monte-Carlo estimate of the channel information (nats) and MMSE matrix.

    The erasure part is handled in closed form; only the Gaussian channel is
    sampled. The reported standard error covers the Monte-Carlo part.
    """
    dim = model.k - 1
    if alpha == 1.0:
        return ChannelMoments(info=model.entropy(), mmse=np.zeros((dim, dim)),
                              info_stderr=0.0, samples=0)
    v, w, m = moment_samples(S, model, n_mc, seed)
    info_g = float(v.mean())
    stderr_g = float(v.std(ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else float("inf")
    second = (model.mu.T * w.mean(axis=0)) @ model.mu
    mmse_g = second - (m.T @ m) / n_mc
    return _mix_erasure(info_g, mmse_g, stderr_g, alpha, model, n_mc,
                        slack=5.0 * stderr_g)


@lru_cache(maxsize=8)
def _quad_grid(dim: int, nodes: int):
    t, wq = np.polynomial.hermite.hermgauss(nodes)
    if dim == 1:
        z, w = (np.sqrt(2.0) * t)[:, None], wq / np.sqrt(np.pi)
    else:
        z = np.sqrt(2.0) * np.stack(
            [g.ravel() for g in np.meshgrid(t, t, indexing="ij")], axis=1)
        w = np.outer(wq, wq).ravel() / np.pi
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


def channel_moments_quadrature(S, alpha, model: CommunityModel,
                               nodes: int | None = None) -> ChannelMoments:
    """Deterministic Gauss-Hermite evaluation for label dimension 1 or 2.

    Integrates each mixture component under its own noise measure with a
    tensor-product rule (>= 64 nodes per axis), which keeps the integrand
    smooth at any SNR. Raises for k > 3.
    """
    dim = model.k - 1
    if dim > 2:
        raise ValueError(f"quadrature supports label dimension <= 2, got {dim}")
    if nodes is None:
        nodes = _QUAD_NODES_1D if dim == 1 else _QUAD_NODES_2D
    if nodes < 64:
        raise ValueError("use at least 64 quadrature nodes per axis")
    if alpha == 1.0:
        return ChannelMoments(info=model.entropy(), mmse=np.zeros((dim, dim)),
                              info_stderr=0.0, samples=0)
    z, wq = _quad_grid(dim, nodes)
    means = _component_means(S, model)
    log_p = np.log(model.p)
    info_g = 0.0
    second = np.zeros((dim, dim))
    outer = np.zeros((dim, dim))
    for a in range(model.k):
        y = means[a][None, :] + z
        L, ll, lse = _log_posterior_parts(y, means, log_p)
        info_g += model.p[a] * float(wq @ (L[:, a] - lse))
        w = np.exp(ll - ll.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        m = w @ model.mu
        second += model.p[a] * (model.mu.T * (wq @ w)) @ model.mu
        outer += model.p[a] * (m.T * wq) @ m
    mmse_g = second - outer
    return _mix_erasure(info_g, mmse_g, 0.0, alpha, model,
                        samples=model.k * z.shape[0], slack=0.0)
