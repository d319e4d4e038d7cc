"""Spectral label inference from averaged correlated networks.

The layers are combined as sum_l G_l / sqrt(L) (pairwise: (G_1 + G_2)/sqrt(2)),
which preserves unit noise variance while adding the signals, so L identical
layers with coupling R act like a single network with R_eff = sqrt(L) R. The
informative eigenvectors of the average sit next to the bulk edge once the
corresponding eigenvalue of R_eff exceeds 1 in magnitude, with predictable
alignment: an eigenvalue lam of R_eff yields an embedding coordinate that
correlates with the label direction at overlap sqrt(1 - 1/lam^2).

Cluster labeling runs a Gaussian-mixture EM in the embedding space. Because
eigenvectors carry an arbitrary orthogonal gauge, the theory-predicted
component centers are first aligned to the data (seeded k-means, community
matching by prior weight, then an orthogonal Procrustes fit); every step is
equivariant under rotations of the embedding, so the output is too. When
some eigenvalue of R_eff is too close to the detectability edge the centers
are unreliable and EM falls back to a plain k-means initialization, recorded
in the output metadata.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import eigsh

from .bp import NodeEstimates
from .labels import CommunityModel
from .seeding import spawn_rng

_CENTER_MARGIN = 1.05
_EM_TOL = 1e-8
_EM_MAX_ITERS = 300
_MAX_RESTARTS = 5


@dataclass
class SpectralEmbedding:
    """Informative eigenvector coordinates, scaled by sqrt(n)."""

    coords: np.ndarray
    eigenvalues: np.ndarray
    effective_r: np.ndarray | None = None
    d: float | None = None
    negative: bool = False

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def average_networks(g1, g2) -> sp.csr_matrix:
    """(G_1 + G_2) / sqrt(2) as a sparse symmetric matrix."""
    if g1.n != g2.n:
        raise ValueError(f"size mismatch: {g1.n} vs {g2.n}")
    return (g1.to_sparse() + g2.to_sparse()) / np.sqrt(2.0)


def average_many(graphs) -> tuple[sp.csr_matrix, np.ndarray | None, float | None]:
    """1/sqrt(L)-weighted sum of L layers plus the effective (R_eff, d) record.

    R_eff = sqrt(L) R is reported only when every layer shares the same
    (d, R); otherwise the effective coupling is left unset.
    """
    graphs = list(graphs)
    if not graphs:
        raise ValueError("need at least one network")
    n = graphs[0].n
    if any(g.n != n for g in graphs):
        raise ValueError("all networks must have the same size")
    L = len(graphs)
    total = graphs[0].to_sparse().astype(float)
    for g in graphs[1:]:
        total = total + g.to_sparse()
    avg = total / np.sqrt(L)
    shared = all(
        g.R is not None and graphs[0].R is not None
        and np.allclose(g.R, graphs[0].R) and g.d == graphs[0].d
        for g in graphs)
    if shared and graphs[0].R is not None:
        return avg, np.sqrt(L) * np.asarray(graphs[0].R, dtype=float), graphs[0].d
    return avg, None, None


def spectral_embed(avg, k: int, *, negative: bool = False,
                   effective_r=None, d=None) -> SpectralEmbedding:
    """Embed nodes by the informative eigenvectors of the averaged matrix.

    With positive-definite coupling the informative eigenvalues are the
    largest algebraic ones after the degree (Perron) eigenvalue, which is
    discarded; with negative-definite coupling they are the smallest
    algebraic ones and there is no Perron vector to discard.
    """
    if sp.issparse(avg):
        A = avg.tocsr().astype(float)
    else:
        A = sp.csr_matrix(np.asarray(avg, dtype=float))
    n = A.shape[0]
    if k - 1 > n:
        raise ValueError(f"need n >= k-1, got n={n}, k={k}")
    if negative:
        vals, vecs = eigsh(A, k=k - 1, which="SA")
        order = np.argsort(vals)  # most negative (strongest) first
    else:
        vals, vecs = eigsh(A, k=k, which="LA")
        order = np.argsort(vals)[::-1][1:]  # drop the Perron vector
    vals, vecs = vals[order], vecs[:, order]
    coords = np.sqrt(n) * vecs
    return SpectralEmbedding(coords=coords, eigenvalues=vals,
                             effective_r=effective_r, d=d, negative=negative)


def predicted_centers(model: CommunityModel, effective_r, d: float, n: int):
    """Theory component centers in the embedding space, one row per community.

    Eigen-directions of the effective coupling with |lam| > 1 appear in the
    embedding with overlap factor sqrt(1 - 1/lam^2); directions at or below
    the edge contribute nothing. Returns (centers, factors, eigenvalues).
    """
    R = np.atleast_2d(np.asarray(effective_r, dtype=float))
    lam, V = np.linalg.eigh(R)
    if lam.sum() >= 0:
        order = np.argsort(lam)[::-1]
    else:
        order = np.argsort(lam)
    lam, V = lam[order], V[:, order]
    factors = np.sqrt(np.clip(1.0 - 1.0 / np.maximum(lam * lam, 1e-12), 0.0, None))
    factors = np.where(np.abs(lam) > 1.0, factors, 0.0)
    centers = (model.mu @ V) * factors[None, :]
    return centers, factors, lam


# ---------------------------------------------------------------------------
# Seeded k-means (used for alignment and as the fallback initialization)
# ---------------------------------------------------------------------------

def _kmeans(X, k, rng, restarts=4, max_iters=100):
    n = X.shape[0]
    best = None
    for _ in range(restarts):
        centers = np.empty((k, X.shape[1]))
        centers[0] = X[rng.integers(n)]
        d2 = np.sum((X - centers[0]) ** 2, axis=1)
        for c in range(1, k):
            probs = d2 / d2.sum() if d2.sum() > 0 else np.full(n, 1.0 / n)
            centers[c] = X[rng.choice(n, p=probs)]
            d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
        assign = None
        for _ in range(max_iters):
            dists = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_assign = dists.argmin(axis=1)
            if assign is not None and np.array_equal(new_assign, assign):
                break
            assign = new_assign
            for c in range(k):
                mask = assign == c
                if mask.any():
                    centers[c] = X[mask].mean(axis=0)
        inertia = float(dists[np.arange(n), assign].sum())
        if best is None or inertia < best[0]:
            best = (inertia, centers.copy(), assign.copy())
    _, centers, assign = best
    weights = np.bincount(assign, minlength=k) / n
    return centers, weights, assign


def _match_components(weights, center_norms, p, target_norms):
    """Assign mixture components to communities by prior weight, with center
    magnitude as tiebreaker. Returns perm with perm[a] = component index."""
    cost = (weights[:, None] - p[None, :]) ** 2
    cost = cost + 0.05 * (center_norms[:, None] - target_norms[None, :]) ** 2
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(p), dtype=np.int64)
    perm[cols] = rows
    return perm


def _procrustes(source, target, weights):
    """Orthogonal Q (reflections allowed) minimizing sum_a w_a |s_a Q - t_a|^2."""
    B = (source * weights[:, None]).T @ target
    U, _, Vt = np.linalg.svd(B)
    return U @ Vt


# ---------------------------------------------------------------------------
# Gaussian-mixture EM
# ---------------------------------------------------------------------------

def _em_log_density(X, means, covs):
    n, dim = X.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for c in range(k):
        diff = X - means[c]
        w, V = np.linalg.eigh(covs[c])
        if w.min() <= 1e-12:
            raise FloatingPointError("degenerate component covariance")
        sol = diff @ (V / w) @ V.T
        out[:, c] = -0.5 * np.sum(sol * diff, axis=1) \
            - 0.5 * np.sum(np.log(w)) - 0.5 * dim * np.log(2 * np.pi)
    return out

def _run_em(X, means, weights, covs, max_iters=_EM_MAX_ITERS, tol=_EM_TOL):
    n = X.shape[0]
    prev_ll = -np.inf
    resp = None
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        logd = _em_log_density(X, means, covs) + np.log(weights)[None, :]
        mx = logd.max(axis=1, keepdims=True)
        lse = mx[:, 0] + np.log(np.exp(logd - mx).sum(axis=1))
        ll = float(lse.sum())
        resp = np.exp(logd - lse[:, None])
        Nc = resp.sum(axis=0)
        if np.any(Nc < 1e-10):
            raise FloatingPointError("empty mixture component")
        weights = Nc / n
        means = (resp.T @ X) / Nc[:, None]
        covs = []
        for c in range(means.shape[0]):
            diff = X - means[c]
            covs.append((diff.T * resp[:, c]) @ diff / Nc[c])
        covs = np.array(covs)
        if abs(ll - prev_ll) < tol:
            converged = True
            break
        prev_ll = ll
    return resp, means, weights, covs, ll, it, converged


def gmm_label(embedding: SpectralEmbedding, model: CommunityModel,
              specs, d: float, seed: int = 0) -> NodeEstimates:
    """Label nodes by a k-component Gaussian mixture fit to the embedding.

    Components are initialized at the theory-predicted centers (aligned to
    the data's eigenvector gauge) with weights at the prior; when a
    predicted overlap factor is unreliable the initialization falls back to
    k-means. The path taken is reported in `meta["init_path"]`.
    """
    X = embedding.coords
    n, dim = X.shape
    k = model.k
    if embedding.effective_r is not None:
        eff_r = embedding.effective_r
    else:
        eff_r = sum(layer.R for layer in specs.layers) / np.sqrt(specs.num_layers)
    centers, factors, lam = predicted_centers(model, eff_r, d, n)
    target_norms = np.linalg.norm(centers, axis=1)
    rng = spawn_rng(seed, "gmm")

    km_centers, km_weights, _ = _kmeans(X, k, rng)
    km_norms = np.linalg.norm(km_centers, axis=1)

    use_theory = bool(np.all(np.abs(lam) > _CENTER_MARGIN))
    if use_theory:
        perm = _match_components(km_weights, km_norms, model.p, target_norms)
        Q = _procrustes(centers, km_centers[perm], model.p)
        means0 = centers @ Q
        weights0 = model.p.copy()
        sigma2 = float(np.mean(np.clip(1.0 - factors ** 2, 0.05, 1.0)))
        covs0 = np.array([sigma2 * np.eye(dim) for _ in range(k)])
        path = "theory-centers"
    else:
        means0 = km_centers.copy()
        weights0 = np.maximum(km_weights, 1e-3)
        weights0 = weights0 / weights0.sum()
        covs0 = np.array([np.eye(dim) for _ in range(k)])
        path = "kmeans"

    last_err = None
    for attempt in range(_MAX_RESTARTS):
        try:
            resp, means_f, weights_f, _, ll, iters, converged = _run_em(
                X, means0.copy(), weights0.copy(), covs0.copy())
            break
        except FloatingPointError as err:
            last_err = err
            jitter = spawn_rng(seed, "gmm-jitter", attempt)
            means0 = means0 + 0.05 * jitter.standard_normal(means0.shape)
            covs0 = covs0 + 0.1 * np.eye(dim)[None, :, :]
    else:
        raise RuntimeError(
            f"mixture fit degenerate after {_MAX_RESTARTS} restarts: {last_err}")

    # Pin component identity to communities by fitted weight and magnitude.
    perm = _match_components(weights_f, np.linalg.norm(means_f, axis=1),
                             model.p, target_norms)
    marginals = resp[:, perm]
    means = marginals @ model.mu
    return NodeEstimates(marginals=marginals, means=means, iterations=iters,
                         converged=converged,
                         meta={"init_path": path, "log_likelihood": ll,
                               "restarts": attempt})
