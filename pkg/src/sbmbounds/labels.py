"""Community priors, whitened label embeddings, and per-node observations.

A model with k communities and prior p embeds the labels as k points
mu_1..mu_k in R^(k-1) chosen so that

    sum_a p_a mu_a = 0        and        sum_a p_a mu_a mu_a^T = I.

Side information about a node's label comes through two channels: an
erasure channel that reveals the true community index with probability
alpha, and a Gaussian channel y = sqrt(S) x + noise with SNR matrix S.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPriorError
from .linalg import psd_sqrt, symmetrize
from .seeding import spawn_rng

_WHITEN_TOL = 1e-10


@dataclass(frozen=True)
class CommunityModel:
    """Prior p over k communities and the whitened embedding mu (k x (k-1))."""

    k: int
    p: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        if p.shape != (self.k,) or mu.shape != (self.k, self.k - 1):
            raise ValueError("inconsistent shapes for prior/embedding")
        if np.any(p <= 0):
            raise InvalidPriorError("prior entries must be strictly positive")
        if abs(p.sum() - 1.0) > 1e-9:
            raise InvalidPriorError(f"prior sums to {p.sum()!r}, expected 1")
        mean = p @ mu
        second = (mu.T * p) @ mu
        if np.abs(mean).max() > _WHITEN_TOL:
            raise ValueError("embedding is not centered under the prior")
        if np.abs(second - np.eye(self.k - 1)).max() > _WHITEN_TOL:
            raise ValueError("embedding second moment is not the identity")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "mu", mu)

    def entropy(self) -> float:
        """Label entropy in nats."""
        return float(-np.sum(self.p * np.log(self.p)))


@dataclass(frozen=True)
class ChannelSpec:
    """Side-information description: erasure reveal probability and Gaussian SNR."""

    alpha: float
    S: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        if S.shape[0] != S.shape[1]:
            raise ValueError("S must be square")
        if np.abs(S - S.T).max() > 1e-8:
            raise ValueError("S must be symmetric")
        w, V = np.linalg.eigh(symmetrize(S))
        if w.min() < -1e-10:
            raise ValueError(f"S has eigenvalue {w.min():.3e} < -1e-10")
        S = (V * np.clip(w, 0.0, None)) @ V.T
        object.__setattr__(self, "S", symmetrize(S))

    def sqrt_snr(self) -> np.ndarray:
        return psd_sqrt(self.S)


@dataclass(frozen=True)
class LabelSample:
    n: int
    assignments: np.ndarray
    vectors: np.ndarray
    seed: int


@dataclass(frozen=True)
class CovariateSample:
    """Erasure outputs plus (optionally) Gaussian-channel outputs.

    Erased nodes are represented by absence: `revealed_mask[i]` is False and
    `revealed_labels[i]` is meaningless there. No sentinel enters the
    Euclidean representation.
    """

    revealed_mask: np.ndarray
    revealed_labels: np.ndarray
    gaussian: np.ndarray | None
    channel: ChannelSpec
    seed: int = 0

    @property
    def n(self) -> int:
        return self.revealed_mask.shape[0]


def whiten(p) -> CommunityModel:
    """Build the zero-mean, identity-second-moment embedding for prior p.

    Community a is first embedded as the a-th standard basis vector of R^k,
    centered by p, and mapped through the inverse square root of the centered
    second-moment matrix restricted to its (k-1)-dimensional support. The
    support basis is ordered by eigenvalue (descending) with each basis
    vector's first nonzero coordinate made positive, so the construction is
    deterministic.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise InvalidPriorError("prior must be a vector with at least 2 entries")
    if np.any(p <= 0):
        raise InvalidPriorError("prior entries must be strictly positive")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InvalidPriorError(f"prior sums to {p.sum()!r}, expected 1")
    k = p.size

    cov = np.diag(p) - np.outer(p, p)
    w, V = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1][: k - 1]
    w, V = w[order], V[:, order]
    for j in range(k - 1):
        col = V[:, j]
        lead = col[np.abs(col) > 1e-9][0]
        if lead < 0:
            V[:, j] = -col
    centered = np.eye(k) - p[None, :]
    mu = centered @ (V / np.sqrt(w))
    return CommunityModel(k=k, p=p, mu=mu)


def sample_labels(model: CommunityModel, n: int, seed: int) -> LabelSample:
    """Draw n i.i.d. community labels from the prior."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = spawn_rng(seed, "labels")
    assignments = rng.choice(model.k, size=n, p=model.p)
    return LabelSample(n=n, assignments=assignments,
                       vectors=model.mu[assignments], seed=seed)


def sample_covariates(labels: LabelSample, spec: ChannelSpec, seed: int,
                      include_gaussian: bool = True) -> CovariateSample:
    """Pass the sampled labels through the erasure and Gaussian channels."""
    n = labels.n
    rng = spawn_rng(seed, "covariates")
    revealed_mask = rng.random(n) < spec.alpha
    revealed_labels = np.where(revealed_mask, labels.assignments, -1)
    gaussian = None
    if include_gaussian:
        noise = rng.standard_normal(labels.vectors.shape)
        gaussian = labels.vectors @ spec.sqrt_snr() + noise
    return CovariateSample(revealed_mask=revealed_mask,
                           revealed_labels=revealed_labels,
                           gaussian=gaussian, channel=spec, seed=seed)


# ---------------------------------------------------------------------------
# Configuration and CSV serialization
# ---------------------------------------------------------------------------

def _as_snr_matrix(S, k: int) -> np.ndarray:
    """Accept a scalar, a flat row-major list, or a nested list of rows."""
    dim = k - 1
    if S is None:
        return np.zeros((dim, dim))
    S = np.asarray(S, dtype=float)
    if S.ndim == 0:
        return float(S) * np.eye(dim)
    if S.ndim == 1:
        if S.size != dim * dim:
            raise ValueError(f"flat S must have {dim * dim} entries, got {S.size}")
        return S.reshape(dim, dim)
    return S


def model_from_config(cfg: dict) -> tuple[CommunityModel, ChannelSpec]:
    """Build (model, channel) from a JSON-compatible mapping.

    Recognized keys: `p` (required), `k` (optional consistency check),
    `alpha` (default 0), `S` (scalar, flat row-major, or nested rows;
    default zero matrix).
    """
    if "p" not in cfg:
        raise InvalidPriorError("configuration is missing the prior 'p'")
    model = whiten(cfg["p"])
    if "k" in cfg and int(cfg["k"]) != model.k:
        raise ValueError(f"configured k={cfg['k']} but p has {model.k} entries")
    channel = ChannelSpec(alpha=float(cfg.get("alpha", 0.0)),
                          S=_as_snr_matrix(cfg.get("S"), model.k))
    return model, channel


def load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_labels_csv(sample: LabelSample, path) -> None:
    """One row per node: index, community, coordinates."""
    dim = sample.vectors.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "community"] + [f"x{j}" for j in range(dim)])
        for i in range(sample.n):
            writer.writerow([i, int(sample.assignments[i])]
                            + [repr(v) for v in sample.vectors[i]])


def read_labels_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (assignments, vectors) from the CSV written by write_labels_csv."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    assignments = np.array([int(r[1]) for r in body], dtype=np.int64)
    vectors = np.array([[float(v) for v in r[2:]] for r in body], dtype=float)
    return assignments, vectors


def write_covariates_csv(cov: CovariateSample, path) -> None:
    """One row per node: index, revealed community (blank if erased), y-coords."""
    dim = 0 if cov.gaussian is None else cov.gaussian.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "revealed"] + [f"y{j}" for j in range(dim)])
        for i in range(cov.n):
            rev = int(cov.revealed_labels[i]) if cov.revealed_mask[i] else ""
            row = [i, rev]
            if dim:
                row += [repr(v) for v in cov.gaussian[i]]
            writer.writerow(row)


def read_covariates_csv(path, channel: ChannelSpec) -> CovariateSample:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    n = len(body)
    mask = np.zeros(n, dtype=bool)
    labels_out = np.full(n, -1, dtype=np.int64)
    dim = len(rows[0]) - 2
    gaussian = np.zeros((n, dim)) if dim else None
    for r in body:
        i = int(r[0])
        if r[1] != "":
            mask[i] = True
            labels_out[i] = int(r[1])
        if dim:
            gaussian[i] = [float(v) for v in r[2:]]
    return CovariateSample(revealed_mask=mask, revealed_labels=labels_out,
                           gaussian=gaussian, channel=channel)
