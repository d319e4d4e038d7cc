"""Samplers for the degree-balanced SBM layers and their Gaussian-equivalent
matrix observations.

Edges of a layer with parameters (d, R) are independent Bernoulli draws with

    P(edge i~j) = d/n + sqrt(d (1 - d/n)) / n * x_i^T R x_j,

which is a valid probability only for compatible (d, R, n); validity is
checked over all community pairs present in the sample before anything is
drawn. The Gaussian-equivalent observation replaces the adjacency matrix by
Z = sqrt(t) * (X R X^T) / sqrt(n) + noise with unit off-diagonal and
variance-2 diagonal noise.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import EdgeProbabilityError, SizeLimitError
from .labels import LabelSample
from .seeding import spawn_rng

_DENSE_LIMIT = 3000
_GAUSS_EQUIV_LIMIT = 5000


@dataclass(frozen=True)
class AdjacencyList:
    """Undirected simple graph as a sorted (i < j) edge array plus layer params."""

    n: int
    edges: np.ndarray
    d: float
    R: np.ndarray | None

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        if self.edges.size:
            deg += np.bincount(self.edges[:, 0], minlength=self.n)
            deg += np.bincount(self.edges[:, 1], minlength=self.n)
        return deg

    def to_sparse(self) -> sp.csr_matrix:
        if self.edges.size == 0:
            return sp.csr_matrix((self.n, self.n))
        i, j = self.edges[:, 0], self.edges[:, 1]
        ones = np.ones(len(i))
        A = sp.coo_matrix((ones, (i, j)), shape=(self.n, self.n))
        return (A + A.T).tocsr()


@dataclass(frozen=True)
class GaussianEquivObservation:
    n: int
    Z: np.ndarray
    t: float
    R: np.ndarray


def edge_probability(x_i, x_j, d: float, R, n: int, pair=None) -> float:
    """Bernoulli parameter for one node pair; errors if it leaves [0, 1]."""
    if not 0 < d < n:
        raise ValueError(f"expected degree d={d} must satisfy 0 < d < n={n}")
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    prob = d / n + np.sqrt(d * (1.0 - d / n)) / n * float(x_i @ R @ x_j)
    if not 0.0 <= prob <= 1.0:
        where = f" for community pair {pair}" if pair is not None else ""
        raise EdgeProbabilityError(
            f"edge probability {prob:.6g} outside [0, 1]{where} "
            f"(d={d}, n={n})", pair=pair, probability=prob)
    return prob


def _present_communities(labels: LabelSample):
    comms, first = np.unique(labels.assignments, return_index=True)
    return comms, labels.vectors[first]


def community_edge_probabilities(labels: LabelSample, d: float, R,
                                 n: int | None = None) -> dict:
    """Edge probability for every pair of communities present in the sample.

    Raises EdgeProbabilityError naming the offending pair when any value
    leaves [0, 1]; this is the configuration-time validity scan.
    """
    n = n or labels.n
    comms, vecs = _present_communities(labels)
    probs = {}
    for ia, a in enumerate(comms):
        for ib, b in enumerate(comms[ia:], start=ia):
            probs[(int(a), int(comms[ib]))] = edge_probability(
                vecs[ia], vecs[ib], d, R, n, pair=(int(a), int(comms[ib])))
    return probs


def _assumption_guards(n: int, d: float):
    if not 1.0 <= d <= n / 2:
        raise ValueError(
            f"expected degree d={d} must lie in [1, n/2] = [1, {n / 2}]")
    if d < 10:
        warnings.warn(
            f"expected degree d={d} is small; the diverging-degree regime "
            f"is poorly approximated below d=10", RuntimeWarning, stacklevel=3)


def _bernoulli_positions(rng, total: int, prob: float) -> np.ndarray:
    """Success positions of `total` i.i.d. Bernoulli(prob) trials.

    Simulates the process exactly through geometric gaps between successes.
    """
    if total <= 0 or prob <= 0.0:
        return np.empty(0, dtype=np.int64)
    if prob >= 1.0:
        return np.arange(total, dtype=np.int64)
    chunks = []
    last = -1
    while True:
        remaining = total - (last + 1)
        expect = remaining * prob
        size = int(expect + 5.0 * np.sqrt(expect + 1.0)) + 16
        gaps = rng.geometric(prob, size=size)
        pos = last + np.cumsum(gaps)
        if pos[-1] >= total:
            chunks.append(pos[pos < total])
            break
        chunks.append(pos)
        last = int(pos[-1])
    return np.concatenate(chunks)


def _decode_triangular(flat: np.ndarray, m: int):
    """Map flat indices into {(r, c): 0 <= r < c < m} enumerated row-major."""
    f = flat.astype(np.float64)
    r = np.floor(((2 * m - 1) - np.sqrt((2 * m - 1) ** 2 - 8 * f)) / 2).astype(np.int64)
    offset = r * (2 * m - 1 - r) // 2
    # correct floating-point boundary cases by at most one row
    over = offset > flat
    r[over] -= 1
    offset = r * (2 * m - 1 - r) // 2
    under = flat - offset >= (m - 1 - r)
    r[under] += 1
    offset = r * (2 * m - 1 - r) // 2
    c = flat - offset + r + 1
    return r, c


def generate_network(labels: LabelSample, d: float, R, seed: int,
                     method: str = "block") -> AdjacencyList:
    """Draw one network layer conditionally on the sampled labels.

    `method="block"` draws each community-pair block through an exact
    geometric-gap simulation of the Bernoulli process (O(edges) work);
    `method="dense"` draws every pair individually and is limited to small n.
    Distinct seeds give conditionally independent layers.
    """
    n = labels.n
    R = np.atleast_2d(np.asarray(R, dtype=float))
    _assumption_guards(n, d)
    probs = community_edge_probabilities(labels, d, R)

    if method == "dense":
        if n > _DENSE_LIMIT:
            raise SizeLimitError(f"dense sampling limited to n <= {_DENSE_LIMIT}")
        rng = spawn_rng(seed, "net-dense")
        coef = np.sqrt(d * (1.0 - d / n)) / n
        P = d / n + coef * labels.vectors @ R @ labels.vectors.T
        upper = np.triu(rng.random((n, n)) < P, k=1)
        i, j = np.nonzero(upper)
        edges = np.column_stack([i, j]).astype(np.int64)
    elif method == "block":
        comms, _ = _present_communities(labels)
        members = {int(a): np.flatnonzero(labels.assignments == a) for a in comms}
        rows = []
        for ia, a in enumerate(comms):
            for b in comms[ia:]:
                a, b = int(a), int(b)
                idx_a, idx_b = members[a], members[b]
                p_ab = probs[(a, b)]
                rng = spawn_rng(seed, "net-block", a, b)
                if a == b:
                    m = len(idx_a)
                    total = m * (m - 1) // 2
                    flat = _bernoulli_positions(rng, total, p_ab)
                    r, c = _decode_triangular(flat, m)
                    i, j = idx_a[r], idx_a[c]
                else:
                    total = len(idx_a) * len(idx_b)
                    flat = _bernoulli_positions(rng, total, p_ab)
                    i = idx_a[flat // len(idx_b)]
                    j = idx_b[flat % len(idx_b)]
                if len(flat):
                    rows.append(np.column_stack([np.minimum(i, j),
                                                 np.maximum(i, j)]))
        edges = (np.concatenate(rows).astype(np.int64) if rows
                 else np.empty((0, 2), dtype=np.int64))
    else:
        raise ValueError(f"unknown sampling method {method!r}")

    if len(edges):
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
    return AdjacencyList(n=n, edges=edges, d=float(d), R=R)


def generate_gaussian_equiv(labels: LabelSample, R, t: float = 1.0,
                            seed: int = 0, with_noise: bool = True
                            ) -> GaussianEquivObservation:
    """Dense symmetric matrix observation Z = sqrt(t) X R X^T / sqrt(n) + noise."""
    n = labels.n
    if n > _GAUSS_EQUIV_LIMIT:
        raise SizeLimitError(
            f"dense matrix observation limited to n <= {_GAUSS_EQUIV_LIMIT}")
    R = np.atleast_2d(np.asarray(R, dtype=float))
    W = labels.vectors @ R @ labels.vectors.T / np.sqrt(n)
    Z = np.sqrt(t) * W
    if with_noise:
        rng = spawn_rng(seed, "gauss-equiv")
        upper = np.triu(rng.standard_normal((n, n)), k=1)
        noise = upper + upper.T
        np.fill_diagonal(noise, np.sqrt(2.0) * rng.standard_normal(n))
        Z = Z + noise
    return GaussianEquivObservation(n=n, Z=0.5 * (Z + Z.T), t=float(t), R=R)


# ---------------------------------------------------------------------------
# Edge-list files
# ---------------------------------------------------------------------------

def write_edge_list(adj: AdjacencyList, path, k: int, layer: int) -> None:
    """Header line `n k layer d`, then sorted 0-indexed `i j` pairs."""
    with open(path, "w") as fh:
        fh.write(f"{adj.n} {k} {layer} {adj.d!r}\n")
        for i, j in adj.edges:
            fh.write(f"{i} {j}\n")


def read_edge_list(path, R=None) -> tuple[AdjacencyList, int, int]:
    """Returns (adjacency, k, layer); R is not stored in the file."""
    with open(path) as fh:
        header = fh.readline().split()
        n, k, layer, d = int(header[0]), int(header[1]), int(header[2]), float(header[3])
        pairs = [tuple(map(int, line.split())) for line in fh if line.strip()]
    edges = (np.array(pairs, dtype=np.int64) if pairs
             else np.empty((0, 2), dtype=np.int64))
    return AdjacencyList(n=n, edges=edges, d=d, R=R), k, layer
