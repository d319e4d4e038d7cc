"""Experiment orchestration: parameter sweeps, CSV output, and the CLI.

A sweep is the Cartesian product of named axes (`r` rescales every layer's
coupling to r*I, `lambda1`/`lambda2` set the diagonal coupling entries,
`alpha` sets the reveal probability) crossed with independent trials. Each
task gets a seed derived from (root seed, point index, trial), rows are
appended to one CSV per method as they finish, and a progress log makes
interrupted sweeps resumable. Reruns with the same config and seed
reproduce every column except wall_time.

Parallelism across tasks is capped by the SBM_LIMITS_THREADS environment
variable (default: CPU count).
"""

import argparse
import csv
import hashlib
import json
import multiprocessing
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import bp as bp_mod
from . import netgen, oracle, spectral
from .errors import NonConvergenceError
from .labels import (ChannelSpec, load_config, model_from_config,
                     sample_covariates, sample_labels, write_covariates_csv,
                     write_labels_csv)
from .potential import MinimizeOptions, NetworkSpec, minimize_potential
from .seeding import spawn_rng

_ROW_FIELDS = ["config_hash", "method", "point", "trial", "seed", "value",
               "f_star", "iterations", "converged", "init_path", "error",
               "wall_time"]


@dataclass
class ExperimentConfig:
    p: list
    n: int = 1000
    alpha: float = 0.0
    S: object = None
    layers: list = field(default_factory=list)
    sweep: list = field(default_factory=list)
    trials: int = 1
    seed: int = 0
    methods: list = field(default_factory=lambda: ["bound"])
    bp: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        for axis in self.sweep:
            if "axis" not in axis or not axis.get("values"):
                raise ValueError("each sweep axis needs a name and values")
        known = {"r", "alpha", "lambda1", "lambda2"}
        for axis in self.sweep:
            if axis["axis"] not in known:
                raise ValueError(f"unknown sweep axis {axis['axis']!r}; "
                                 f"known: {sorted(known)}")

    @staticmethod
    def from_dict(cfg: dict) -> "ExperimentConfig":
        fields = {f for f in ExperimentConfig.__dataclass_fields__}
        unknown = set(cfg) - fields - {"k"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return ExperimentConfig(**{k: v for k, v in cfg.items() if k in fields})

    def hash(self) -> str:
        canon = json.dumps(self.__dict__, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def sweep_points(config: ExperimentConfig):
    """Cartesian product of the sweep axes; a single empty point if no axes."""
    if not config.sweep:
        return [{}]
    points = [{}]
    for axis in config.sweep:
        points = [{**pt, axis["axis"]: val}
                  for pt in points for val in axis["values"]]
    return points


def resolve_point(config: ExperimentConfig, point: dict):
    """Instantiate (model, channel, netspec) for one sweep point."""
    model, channel = model_from_config(
        {"p": config.p, "alpha": point.get("alpha", config.alpha),
         "S": config.S})
    dim = model.k - 1
    layer_cfgs = [dict(layer) for layer in config.layers]
    if "r" in point:
        for layer in layer_cfgs:
            layer["R"] = float(point["r"])
    if "lambda1" in point or "lambda2" in point:
        if dim != 2:
            raise ValueError("lambda1/lambda2 axes require k = 3")
        for layer in layer_cfgs:
            base = np.asarray(layer.get("R", 0.0), dtype=float)
            diag = np.diag(base) if base.ndim == 2 else np.full(dim, float(base))
            diag = diag.copy()
            if "lambda1" in point:
                diag[0] = float(point["lambda1"])
            if "lambda2" in point:
                diag[1] = float(point["lambda2"])
            layer["R"] = np.diag(diag)
    spec = NetworkSpec.from_config(layer_cfgs, model.k)
    return model, channel, spec


def _task_seed(root: int, point_idx: int, trial: int) -> int:
    return int(spawn_rng(root, "sweep", point_idx, trial).integers(0, 2 ** 62))


def _sample_instance(model, channel, spec, n, seed):
    gen = spawn_rng(seed, "instance")
    seeds = gen.integers(0, 2 ** 62, size=2 + spec.num_layers)
    labels = sample_labels(model, n, seed=int(seeds[0]))
    include_gaussian = bool(np.any(channel.S != 0.0))
    covariates = sample_covariates(labels, channel, seed=int(seeds[1]),
                                   include_gaussian=include_gaussian)
    networks = [netgen.generate_network(labels, layer.d, layer.R,
                                        seed=int(seeds[2 + ell]))
                for ell, layer in enumerate(spec.layers)]
    return labels, covariates, networks


def run_task(config: ExperimentConfig, point_idx: int, point: dict,
             method: str, trial: int) -> dict:
    """One (method, point, trial) unit of work; errors land in the row."""
    row = {f: "" for f in _ROW_FIELDS}
    row.update(config_hash=config.hash(), method=method, point=point_idx,
               trial=trial)
    row.update({k: v for k, v in point.items()})
    seed = _task_seed(config.seed, point_idx, trial)
    row["seed"] = seed
    start = time.perf_counter()
    try:
        model, channel, spec = resolve_point(config, point)
        if method == "bound":
            result = minimize_potential(spec, channel, model,
                                        MinimizeOptions(seed=seed))
            row["value"] = repr(float(np.trace(result.mmse_bound)))
            row["f_star"] = repr(result.f_star)
            row["converged"] = result.method
        elif method == "bp":
            labels, covariates, networks = _sample_instance(
                model, channel, spec, config.n, seed)
            est = bp_mod.run_bp(networks, covariates, model, spec,
                                bp_mod.BpConfig(**config.bp), seed=seed)
            row["value"] = repr(bp_mod.compute_mse(est.means, labels))
            row["iterations"] = est.iterations
            row["converged"] = est.converged
        elif method == "spectral":
            labels, covariates, networks = _sample_instance(
                model, channel, spec, config.n, seed)
            avg, eff_r, d = spectral.average_many(networks)
            negative = bool(np.all(np.linalg.eigvalsh(spec.layers[0].R) < 0))
            emb = spectral.spectral_embed(avg, model.k, negative=negative,
                                          effective_r=eff_r, d=d)
            est = spectral.gmm_label(emb, model, spec,
                                     d or spec.layers[0].d, seed=seed)
            row["value"] = repr(bp_mod.compute_mse(est.means, labels))
            row["iterations"] = est.iterations
            row["converged"] = est.converged
            row["init_path"] = est.meta.get("init_path", "")
        elif method == "oracle":
            labels, covariates, networks = _sample_instance(
                model, channel, spec, config.n, seed)
            post = oracle.exact_posterior(networks, None, covariates, model, spec)
            means = post.marginals @ model.mu
            row["value"] = repr(bp_mod.compute_mse(means, labels))
            row["f_star"] = repr(float(np.trace(post.mmse_matrix)))
            row["converged"] = True
        else:
            raise ValueError(f"unknown method {method!r}")
    except Exception as err:  # recorded, sweep continues
        row["error"] = f"{type(err).__name__}: {err}"
    row["wall_time"] = f"{time.perf_counter() - start:.6f}"
    return row


def _worker(args):
    return run_task(*args)


def _worker_count() -> int:
    env = os.environ.get("SBM_LIMITS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(config: ExperimentConfig, out_dir=None, trials=None):
    """Run all (method, point, trial) tasks; returns per-point summary rows.

    When `out_dir` is given, per-trial rows stream into `<method>.csv`, a
    progress log enables resuming, and summaries land in
    `<method>_summary.csv`.
    """
    if trials is not None:
        config = ExperimentConfig.from_dict({**config.__dict__, "trials": trials})
    points = sweep_points(config)
    tasks = []
    for point_idx, point in enumerate(points):
        for method in config.methods:
            n_trials = 1 if method == "bound" else config.trials
            for trial in range(n_trials):
                tasks.append((config, point_idx, point, method, trial))

    done = set()
    writers, files = {}, {}
    progress_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        progress_path = os.path.join(out_dir, "progress.log")
        if os.path.exists(progress_path):
            with open(progress_path) as fh:
                done = {tuple(line.strip().split(",")) for line in fh if line.strip()}

    axis_names = sorted({name for pt in points for name in pt})
    header = _ROW_FIELDS[:4] + axis_names + _ROW_FIELDS[4:]

    def _writer_for(method):
        if method not in writers:
            path = os.path.join(out_dir, f"{method}.csv")
            newfile = not os.path.exists(path)
            files[method] = open(path, "a", newline="")
            writers[method] = csv.writer(files[method])
            if newfile:
                writers[method].writerow(header)
        return writers[method]

    pending = [t for t in tasks
               if (t[3], str(t[1]), str(t[4])) not in done]
    workers = min(_worker_count(), max(1, len(pending)))
    if workers > 1 and len(pending) > 1:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            results = pool.map(_worker, [t for t in pending])
    else:
        results = [run_task(*t) for t in pending]

    rows = list(results)
    if out_dir is not None:
        with open(progress_path, "a") as prog:
            for task, row in zip(pending, rows):
                writer = _writer_for(task[3])
                writer.writerow([row.get(h, "") for h in header])
                prog.write(f"{task[3]},{task[1]},{task[4]}\n")
        for fh in files.values():
            fh.close()

    summary = _summarize(config, points, rows, axis_names)
    if out_dir is not None:
        by_method = {}
        for s in summary:
            by_method.setdefault(s["method"], []).append(s)
        for method, rows_m in by_method.items():
            path = os.path.join(out_dir, f"{method}_summary.csv")
            with open(path, "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(rows_m[0]))
                writer.writeheader()
                writer.writerows(rows_m)
    return summary


def _summarize(config, points, rows, axis_names):
    summary = []
    for point_idx, point in enumerate(points):
        for method in config.methods:
            vals, conv = [], []
            for row in rows:
                if row["method"] != method or row["point"] != point_idx:
                    continue
                if row["error"]:
                    continue
                vals.append(float(row["value"]))
                conv.append(row.get("converged") in (True, "True"))
            if not vals:
                continue
            entry = {"config_hash": config.hash(), "method": method,
                     "point": point_idx}
            entry.update({k: point.get(k, "") for k in axis_names})
            entry["median_value"] = repr(float(np.median(vals)))
            entry["trials"] = len(vals)
            if method == "bp":
                entry["convergence_rate"] = repr(float(np.mean(conv)))
            summary.append(entry)
    return summary


# ---------------------------------------------------------------------------
# Command-line interface
# ---------------------------------------------------------------------------

class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sbmbounds",
                     description="Information/MMSE bounds and inference for "
                                 "degree-balanced SBMs")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("whiten", "bound", "generate", "bp", "spectral", "oracle",
                 "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--trials", type=int, default=None)
    return parser


def _load_experiment(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    config = ExperimentConfig.from_dict(cfg)
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.trials = args.trials
    return config


def _cmd_whiten(config, args):
    model, _ = model_from_config({"p": config.p, "alpha": config.alpha,
                                  "S": config.S})
    print(f"k = {model.k}")
    for a in range(model.k):
        coords = " ".join(f"{v: .12f}" for v in model.mu[a])
        print(f"mu[{a}] (p={model.p[a]:g}): {coords}")
    mean = model.p @ model.mu
    second = (model.mu.T * model.p) @ model.mu
    print(f"max |sum p mu|      = {np.abs(mean).max():.3e}")
    print(f"max |second - I|    = "
          f"{np.abs(second - np.eye(model.k - 1)).max():.3e}")
    return 0


def _cmd_bound(config, args):
    model, channel, spec = resolve_point(config, {})
    result = minimize_potential(spec, channel, model,
                                MinimizeOptions(seed=config.seed))
    print(f"u_star =\n{result.u_star}")
    print(f"f_star = {result.f_star:.10f} nats")
    print(f"tr(U*) = {float(np.trace(result.mmse_bound)):.10f} "
          f"({result.mmse_bound_note})")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bound.json"), "w") as fh:
            fh.write(result.to_json())
    return 0


def _cmd_generate(config, args):
    if not args.out:
        raise _UsageError("generate requires --out")
    os.makedirs(args.out, exist_ok=True)
    model, channel, spec = resolve_point(config, {})
    labels, covariates, networks = _sample_instance(
        model, channel, spec, config.n, config.seed)
    write_labels_csv(labels, os.path.join(args.out, "labels.csv"))
    write_covariates_csv(covariates, os.path.join(args.out, "covariates.csv"))
    for ell, net in enumerate(networks):
        netgen.write_edge_list(net, os.path.join(args.out, f"edges_{ell}.txt"),
                               k=model.k, layer=ell)
    print(f"wrote {config.n} nodes, {spec.num_layers} layer(s) to {args.out}")
    return 0


def _cmd_bp(config, args):
    model, channel, spec = resolve_point(config, {})
    labels, covariates, networks = _sample_instance(
        model, channel, spec, config.n, config.seed)
    est = bp_mod.run_bp(networks, covariates, model, spec,
                        bp_mod.BpConfig(**config.bp), seed=config.seed)
    mse = bp_mod.compute_mse(est.means, labels)
    print(f"mse = {mse:.6f}  iterations = {est.iterations}  "
          f"converged = {est.converged}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        bp_mod.write_estimates_csv(est, os.path.join(args.out, "bp_estimates.csv"))
    return 0


def _cmd_spectral(config, args):
    model, channel, spec = resolve_point(config, {})
    labels, covariates, networks = _sample_instance(
        model, channel, spec, config.n, config.seed)
    avg, eff_r, d = spectral.average_many(networks)
    negative = bool(np.all(np.linalg.eigvalsh(spec.layers[0].R) < 0))
    emb = spectral.spectral_embed(avg, model.k, negative=negative,
                                  effective_r=eff_r, d=d)
    est = spectral.gmm_label(emb, model, spec, d or spec.layers[0].d,
                             seed=config.seed)
    mse = bp_mod.compute_mse(est.means, labels)
    print(f"mse = {mse:.6f}  init = {est.meta.get('init_path')}  "
          f"converged = {est.converged}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        bp_mod.write_estimates_csv(est,
                                   os.path.join(args.out, "spectral_estimates.csv"))
    return 0


def _cmd_oracle(config, args):
    model, channel, spec = resolve_point(config, {})
    labels, covariates, networks = _sample_instance(
        model, channel, spec, config.n, config.seed)
    post = oracle.exact_posterior(networks, None, covariates, model, spec)
    print("exact marginals (rows = nodes):")
    for i in range(config.n):
        print("  " + " ".join(f"{v:.6f}" for v in post.marginals[i]))
    print(f"tr(conditional mmse) = {float(np.trace(post.mmse_matrix)):.6f}")
    means = post.marginals @ model.mu
    print(f"posterior-mean mse   = {bp_mod.compute_mse(means, labels):.6f}")
    return 0


def _cmd_sweep(config, args):
    summary = run_sweep(config, out_dir=args.out)
    for entry in summary:
        line = " ".join(f"{k}={v}" for k, v in entry.items()
                        if k not in ("config_hash",))
        print(line)
    if args.out:
        print(f"rows written under {args.out}")
    return 0


_COMMANDS = {"whiten": _cmd_whiten, "bound": _cmd_bound,
             "generate": _cmd_generate, "bp": _cmd_bp,
             "spectral": _cmd_spectral, "oracle": _cmd_oracle,
             "sweep": _cmd_sweep}


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_experiment(args)
    except _UsageError as err:
        print(parser.format_usage(), file=sys.stderr)
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](config, args)
    except _UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (NonConvergenceError, Exception) as err:
        print(f"runtime error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
