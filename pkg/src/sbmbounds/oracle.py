"""Exact Bayes computations by full enumeration on tiny instances.

All k^n label configurations are scored in the log domain and combined with
log-sum-exp, giving exact posterior marginals, the instance-conditional
error matrix, and an unbiased Monte-Carlo estimate of the per-node mutual
information. Ground truth for the message-passing and channel modules.
"""

from dataclasses import dataclass

import numpy as np

from .bp import edge_probability_matrix
from .labels import CommunityModel, sample_covariates, sample_labels
from .errors import SizeLimitError
from .netgen import generate_network
from .seeding import spawn_rng

MAX_CONFIGS = 531_441  # 3^12

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class ExactPosterior:
    config_log_weights: np.ndarray  # normalized: logsumexp == 0
    marginals: np.ndarray           # n x k
    mmse_matrix: np.ndarray         # (k-1) x (k-1)
    log_evidence: float


def _enumerate_configs(k: int, n: int) -> np.ndarray:
    count = k ** n
    if count > MAX_CONFIGS:
        raise SizeLimitError(
            f"k^n = {count} exceeds the enumeration limit {MAX_CONFIGS}")
    idx = np.arange(count, dtype=np.int64)
    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] // powers[None, :]) % k).astype(np.int8)


class _InstanceLogLik:
    """Per-configuration observation log-likelihood for one tiny instance."""

    def __init__(self, model: CommunityModel, n: int, networks=(), specs=None,
                 gaussian_obs=None, covariates=None):
        self.model = model
        self.n = n
        self.pair_tables = []  # ((i, j), k x k log-likelihood table)
        self.node_tables = np.zeros((n, model.k))

        networks = list(networks)
        layers = list(specs.layers) if specs is not None else []
        if len(networks) != len(layers):
            raise ValueError("one network per layer is required")
        for net, layer in zip(networks, layers):
            P = edge_probability_matrix(model, layer.d, layer.R, n)
            with np.errstate(divide="ignore"):
                log_edge, log_gap = np.log(P), np.log(1.0 - P)
            adj = np.zeros((n, n), dtype=bool)
            if net.edges.size:
                adj[net.edges[:, 0], net.edges[:, 1]] = True
            for i in range(n):
                for j in range(i + 1, n):
                    self.pair_tables.append(
                        ((i, j), log_edge if adj[i, j] else log_gap))

        if gaussian_obs is not None:
            Q = (np.sqrt(gaussian_obs.t) / np.sqrt(n)
                 * model.mu @ gaussian_obs.R @ model.mu.T)
            Z = gaussian_obs.Z
            for i in range(n):
                for j in range(i + 1, n):
                    tab = -0.5 * (Z[i, j] - Q) ** 2 - 0.5 * _LOG_2PI
                    self.pair_tables.append(((i, j), tab))
                diag = -0.25 * (Z[i, i] - np.diag(Q)) ** 2 \
                    - 0.5 * np.log(4.0 * np.pi)
                self.node_tables[i] += diag

        if covariates is not None:
            alpha = covariates.channel.alpha
            with np.errstate(divide="ignore"):
                log_alpha = np.log(alpha) if alpha > 0 else -np.inf
                log_miss = np.log(1.0 - alpha) if alpha < 1 else -np.inf
            for i in range(n):
                if covariates.revealed_mask[i]:
                    tab = np.full(model.k, -np.inf)
                    tab[covariates.revealed_labels[i]] = log_alpha
                    self.node_tables[i] += tab
                else:
                    self.node_tables[i] += log_miss
            if covariates.gaussian is not None:
                from .linalg import psd_sqrt
                means = model.mu @ psd_sqrt(covariates.channel.S)
                for i in range(n):
                    diff = covariates.gaussian[i][None, :] - means
                    self.node_tables[i] += (-0.5 * np.sum(diff * diff, axis=1)
                                            - 0.5 * (model.k - 1) * _LOG_2PI)

    def loglik(self, digits: np.ndarray) -> np.ndarray:
        """Observation log-likelihood for each configuration row."""
        out = np.zeros(digits.shape[0])
        for i in range(self.n):
            out += self.node_tables[i][digits[:, i]]
        for (i, j), tab in self.pair_tables:
            out += tab[digits[:, i], digits[:, j]]
        return out

    def log_prior(self, digits: np.ndarray) -> np.ndarray:
        logp = np.log(self.model.p)
        out = np.zeros(digits.shape[0])
        for i in range(self.n):
            out += logp[digits[:, i]]
        return out


def _logsumexp(x: np.ndarray) -> float:
    mx = x.max()
    if not np.isfinite(mx):
        return float(mx)
    return float(mx + np.log(np.exp(x - mx).sum()))


def exact_posterior(networks, gaussian_obs, covariates, model: CommunityModel,
                    specs) -> ExactPosterior:
    """Posterior over all label configurations, exactly, via enumeration."""
    if networks:
        n = networks[0].n
    elif gaussian_obs is not None:
        n = gaussian_obs.n
    elif covariates is not None:
        n = covariates.n
    else:
        raise ValueError("at least one observation source is required")
    digits = _enumerate_configs(model.k, n)
    inst = _InstanceLogLik(model, n, networks=networks, specs=specs,
                           gaussian_obs=gaussian_obs, covariates=covariates)
    lw = inst.log_prior(digits) + inst.loglik(digits)
    log_evidence = _logsumexp(lw)
    logw = lw - log_evidence
    w = np.exp(logw)

    marginals = np.empty((n, model.k))
    for i in range(n):
        marginals[i] = np.bincount(digits[:, i], weights=w, minlength=model.k)
    marginals /= marginals.sum(axis=1, keepdims=True)

    dim = model.k - 1
    mmse = np.zeros((dim, dim))
    for i in range(n):
        second = (model.mu.T * marginals[i]) @ model.mu
        mean = marginals[i] @ model.mu
        mmse += second - np.outer(mean, mean)
    mmse /= n
    return ExactPosterior(config_log_weights=logw, marginals=marginals,
                          mmse_matrix=0.5 * (mmse + mmse.T),
                          log_evidence=log_evidence)


def exact_mutual_information_mc(specs, channel, model: CommunityModel, n: int,
                                n_outer_mc: int, seed: int) -> tuple[float, float]:
    """Unbiased MC estimate of the per-node mutual information, with stderr.

    Each replicate samples a full instance (labels, networks, covariates),
    scores the observations against the true configuration, and subtracts
    the exact log-evidence from enumeration.
    """
    if (k_pow := model.k ** n) > MAX_CONFIGS:
        raise SizeLimitError(f"k^n = {k_pow} exceeds {MAX_CONFIGS}")
    include_gaussian = bool(np.any(np.asarray(channel.S) != 0.0))
    digits = _enumerate_configs(model.k, n)
    values = np.empty(n_outer_mc)
    for rep in range(n_outer_mc):
        seeds = spawn_rng(seed, "mi-rep", rep).integers(
            0, 2 ** 62, size=2 + specs.num_layers)
        labels = sample_labels(model, n, seed=int(seeds[0]))
        covariates = sample_covariates(labels, channel, seed=int(seeds[1]),
                                       include_gaussian=include_gaussian)
        networks = [generate_network(labels, layer.d, layer.R,
                                     seed=int(seeds[2 + ell]))
                    for ell, layer in enumerate(specs.layers)]
        inst = _InstanceLogLik(model, n, networks=networks, specs=specs,
                               covariates=covariates)
        ll_true = inst.loglik(labels.assignments[None, :].astype(np.int8))[0]
        log_evidence = _logsumexp(inst.log_prior(digits) + inst.loglik(digits))
        values[rep] = (ll_true - log_evidence) / n
    stderr = float(values.std(ddof=1) / np.sqrt(n_outer_mc)) if n_outer_mc > 1 else float("inf")
    return float(values.mean()), stderr
