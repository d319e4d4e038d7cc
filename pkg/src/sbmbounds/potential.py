"""Variational upper bound on per-node information and the matching error bound.

The objective over the overlap set {0 <= U <= I} is

    F(U) = info(S + sum_l R_l (I - U) R_l) + (1/4) sum_l tr((R_l U)^2),

where `info` is the channel information function evaluated at the effective
SNR. Its minimum upper-bounds the per-node mutual information between the
labels and all observations, and any minimizer U* serves as a (heuristic)
upper bound on the posterior-covariance matrix.

Stationarity of F under the information/error-matrix gradient identity gives
the damped fixed-point map U <- (1-g) U + g M(S_eff(U)) used by
`minimize_potential`; an exhaustive grid over the overlap set is available
for label dimension <= 2 as verification and fallback.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import channel_moments, channel_moments_quadrature
from .errors import NonConvergenceError
from .labels import ChannelSpec, CommunityModel
from .linalg import clip_eigenvalues, is_definite, symmetrize

_OVERLAP_TOL = 1e-10
_TIE_TOL = 1e-8


@dataclass(frozen=True)
class NetworkLayer:
    """One network layer: expected degree d and coupling matrix R."""

    d: float
    R: np.ndarray

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"expected degree must be positive, got {self.d}")
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if np.abs(R - R.T).max() > 1e-8:
            raise ValueError("R must be symmetric")
        if not is_definite(R):
            raise ValueError("R must be positive definite or negative definite")
        object.__setattr__(self, "R", symmetrize(R))


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        dims = {layer.R.shape[0] for layer in self.layers}
        if len(dims) > 1:
            raise ValueError("all layers must share the label dimension")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @staticmethod
    def from_config(layer_cfgs, k: int) -> "NetworkSpec":
        """Build from JSON layer entries {"d": ..., "R": scalar | rows}."""
        dim = k - 1
        layers = []
        for cfg in layer_cfgs:
            R = np.asarray(cfg["R"], dtype=float)
            if R.ndim == 0:
                R = float(R) * np.eye(dim)
            elif R.ndim == 1:
                R = np.diag(R)
            layers.append(NetworkLayer(d=float(cfg["d"]), R=R))
        return NetworkSpec(layers=tuple(layers))


@dataclass
class BoundResult:
    """Outcome of minimizing the potential.

    `f_star` is the per-node information bound in nats; `mmse_bound` equals
    the minimizer and is an upper bound on the error matrix only under the
    unproven tightness hypothesis, hence the "heuristic" label.
    """

    u_star: np.ndarray
    f_star: float
    mmse_bound: np.ndarray
    trajectory: list
    method: str
    mmse_bound_note: str = "heuristic"

    def to_json(self) -> str:
        payload = {
            "u_star": self.u_star.tolist(),
            "f_star": self.f_star,
            "trace_bound": float(np.trace(self.mmse_bound)),
            "mmse_bound": self.mmse_bound.tolist(),
            "mmse_bound_note": self.mmse_bound_note,
            "method": self.method,
            "trajectory": self.trajectory,
        }
        return json.dumps(payload, indent=2)


def validate_overlap(U, dim: int, tol: float = _OVERLAP_TOL) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape != (dim, dim):
        raise ValueError(f"overlap matrix must be {dim}x{dim}, got {U.shape}")
    if np.abs(U - U.T).max() > 1e-8:
        raise ValueError("overlap matrix must be symmetric")
    w = np.linalg.eigvalsh(symmetrize(U))
    if w.min() < -tol or w.max() > 1.0 + tol:
        raise ValueError(
            f"overlap eigenvalues [{w.min():.3e}, {w.max():.3e}] leave [0, 1]")
    return symmetrize(U)


def project_overlap(U) -> np.ndarray:
    return clip_eigenvalues(U, 0.0, 1.0)


class PotentialEvaluator:
    """Evaluates F(U) and the fixed-point map with a consistent info backend.

    For label dimension <= 2 the deterministic quadrature backend is used;
    otherwise Monte Carlo with one fixed seed, so that every evaluation in a
    minimization shares the same random draws.
    """

    def __init__(self, spec: NetworkSpec, channel: ChannelSpec,
                 model: CommunityModel, info_method: str = "auto",
                 n_mc: int = 200_000, seed: int = 0):
        self.spec = spec
        self.channel = channel
        self.model = model
        self.dim = model.k - 1
        if info_method == "auto":
            info_method = "quadrature" if self.dim <= 2 else "mc"
        if info_method not in ("quadrature", "mc"):
            raise ValueError(f"unknown info method {info_method!r}")
        self.info_method = info_method
        self.n_mc = n_mc
        self.seed = seed

    def moments(self, S_eff):
        if self.info_method == "quadrature":
            return channel_moments_quadrature(S_eff, self.channel.alpha, self.model)
        return channel_moments(S_eff, self.channel.alpha, self.model,
                               n_mc=self.n_mc, seed=self.seed)

    def effective_snr(self, U) -> np.ndarray:
        S_eff = np.array(self.channel.S, dtype=float, copy=True)
        eye = np.eye(self.dim)
        for layer in self.spec.layers:
            S_eff = S_eff + layer.R @ (eye - U) @ layer.R
        S_eff = symmetrize(S_eff)
        w = np.linalg.eigvalsh(S_eff)
        if w.min() < -1e-6:
            raise ArithmeticError(
                f"effective SNR has eigenvalue {w.min():.3e} < -1e-6")
        return clip_eigenvalues(S_eff, 0.0, np.inf)

    def trace_term(self, U) -> float:
        total = 0.0
        for layer in self.spec.layers:
            RU = layer.R @ U
            total += float(np.trace(RU @ RU))
        return 0.25 * total

    def potential(self, U) -> float:
        return self.moments(self.effective_snr(U)).info + self.trace_term(U)

    def fixed_point_map(self, U) -> np.ndarray:
        return self.moments(self.effective_snr(U)).mmse


def evaluate_potential(U, spec: NetworkSpec, channel: ChannelSpec,
                       model: CommunityModel, *, evaluator=None, **kwargs) -> float:
    """F(U) for a single overlap matrix; U must lie in the overlap set."""
    evaluator = evaluator or PotentialEvaluator(spec, channel, model, **kwargs)
    U = validate_overlap(U, evaluator.dim)
    return evaluator.potential(U)


@dataclass
class MinimizeOptions:
    method: str = "auto"          # auto | fixed_point | grid | both
    damping: float = 0.5
    tol: float = 1e-5
    max_iters: int = 500
    grid_step: float | None = None  # default 1e-3 (dim 1) / 0.02 (dim 2)
    info_method: str = "auto"
    n_mc: int = 200_000
    seed: int = 0


def _run_fixed_point(evaluator, U0, opts):
    U = project_overlap(np.atleast_2d(U0))
    steps = []
    converged = False
    for _ in range(opts.max_iters):
        M = evaluator.fixed_point_map(U)
        U_next = project_overlap((1.0 - opts.damping) * U + opts.damping * M)
        step = float(np.linalg.norm(U_next - U))
        steps.append(step)
        U = U_next
        if step < opts.tol:
            converged = True
            break
    residual = float(np.linalg.norm(U - evaluator.fixed_point_map(U)))
    return U, converged, len(steps), residual, steps


def _grid_candidates(dim: int, step: float):
    if dim == 1:
        for u in np.arange(0.0, 1.0 + step / 2, step):
            yield np.array([[min(u, 1.0)]])
        return
    if dim == 2:
        us = np.arange(0.0, 1.0 + step / 2, step)
        thetas = np.arange(0.0, math.pi, step)
        for i, u1 in enumerate(us):
            for u2 in us[i:]:
                if np.isclose(u1, u2):
                    yield np.diag([u1, u2])
                    continue
                D = np.diag([u1, u2])
                for th in thetas:
                    c, s = math.cos(th), math.sin(th)
                    Q = np.array([[c, -s], [s, c]])
                    yield Q @ D @ Q.T
        return
    raise ValueError(f"grid search supports label dimension <= 2, got {dim}")


def minimize_potential(spec: NetworkSpec, channel: ChannelSpec,
                       model: CommunityModel,
                       options: MinimizeOptions | None = None) -> BoundResult:
    """Minimize F over the overlap set and return the bound.

    Candidates come from a damped fixed-point iteration started at
    {0, I/2, I, M(S)} (plus those anchor points themselves), and, for label
    dimension <= 2, from an exhaustive grid when requested via
    `options.method` or as a fallback when no start converges. All
    candidates are ranked by F; ties within 1e-8 resolve toward the
    smallest trace.
    """
    opts = options or MinimizeOptions()
    dim = model.k - 1
    evaluator = PotentialEvaluator(spec, channel, model,
                                   info_method=opts.info_method,
                                   n_mc=opts.n_mc, seed=opts.seed)
    eye = np.eye(dim)

    if spec.num_layers == 0:
        # F is constant in U; the meaningful overlap is the no-network MMSE.
        moments = evaluator.moments(evaluator.effective_snr(eye))
        U = project_overlap(moments.mmse)
        return BoundResult(u_star=U, f_star=moments.info, mmse_bound=U.copy(),
                           trajectory=[{"note": "no network layers; "
                                                "overlap set to channel MMSE"}],
                           method="fixed_point")

    candidates = []
    trajectory = []
    any_converged = False
    run_fp = opts.method in ("auto", "fixed_point", "both")
    run_grid = opts.method in ("grid", "both")

    if run_fp:
        prior_mmse = evaluator.moments(evaluator.effective_snr(eye)).mmse
        starts = [("zero", np.zeros((dim, dim))), ("half", 0.5 * eye),
                  ("identity", eye.copy()), ("prior-mmse", prior_mmse)]
        for name, U0 in starts:
            candidates.append((project_overlap(U0), "fixed_point"))
            U, conv, iters, residual, steps = _run_fixed_point(evaluator, U0, opts)
            any_converged = any_converged or conv
            candidates.append((U, "fixed_point"))
            trajectory.append({"start": name, "converged": conv,
                               "iterations": iters, "residual": residual,
                               "final_step": steps[-1] if steps else 0.0})
        if opts.method == "auto" and not any_converged and dim <= 2:
            run_grid = True
            trajectory.append({"note": "fixed point did not converge; "
                                       "falling back to grid"})

    if run_grid:
        step = opts.grid_step or (1e-3 if dim == 1 else 0.02)
        n_grid = 0
        for U in _grid_candidates(dim, step):
            candidates.append((U, "grid"))
            n_grid += 1
        trajectory.append({"grid_points": n_grid, "grid_step": step})

    if not candidates:
        raise NonConvergenceError("no minimization route produced candidates",
                                  trajectory=trajectory)
    if run_fp and not any_converged and not run_grid:
        raise NonConvergenceError(
            "no fixed-point start converged and no grid is available",
            trajectory=trajectory)

    values = np.array([evaluator.potential(U) for U, _ in candidates])
    f_min = values.min()
    near = np.flatnonzero(values <= f_min + _TIE_TOL)
    traces = np.array([np.trace(candidates[i][0]) for i in near])
    winner = near[int(np.argmin(traces))]
    U_star, source = candidates[winner]
    return BoundResult(u_star=U_star, f_star=float(values[winner]),
                       mmse_bound=U_star.copy(), trajectory=trajectory,
                       method=source)


def mmse_bound(result: BoundResult) -> np.ndarray:
    """The minimizer as a matrix bound on the posterior covariance (heuristic)."""
    return result.mmse_bound
