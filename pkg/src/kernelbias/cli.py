"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, density, embedding, kernels
from .clustering import brute_force_partition, multistart
from .dataset import (generate_clusters_with_outliers, generate_graded_line,
                      generate_two_moons, load_dataset, save_dataset)
from .errors import ArgumentError, FormatError, KernelBiasError
from .experiments import (ExperimentConfig, bundled_configs, load_bundled, run_experiment,
                          to_json_safe)

log = logging.getLogger("kernelbias")

THREADS_ENV = "KERNELBIAS_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sigma_arg(s):
    if s == "scott":
        return s
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a positive number or 'scott'") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("bandwidth must be positive")
    return v


def _resolve_sigma(s, data):
    return density.scott_scalar(data) if s == "scott" else float(s)


def _args_hash(args) -> str:
    d = {k: v for k, v in vars(args).items() if k != "func"}
    text = json.dumps(d, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _write_csv(path, header, cols):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in zip(*cols):
            wr.writerow([str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))
                         for v in row])


def _dumps(obj, **kw) -> str:
    return json.dumps(to_json_safe(obj), allow_nan=False, **kw)


def read_labels(path) -> np.ndarray:
    """Labels from a CSV: the ``label`` column if present, else the first column."""
    path = Path(path)
    if not path.exists():
        raise ArgumentError(f"{path} not found")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise FormatError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        float(header[0])
        col, body = 0, rows
    except ValueError:
        col = header.index("label") if "label" in header else 0
        body = rows[1:]
    out = []
    for i, r in enumerate(body, start=1 if body is rows else 2):
        try:
            v = float(r[col])
        except (ValueError, IndexError):
            raise FormatError(f"{path}: row {i} has no numeric label") from None
        if v != int(v):
            raise FormatError(f"{path}: row {i} label {v} is not an integer")
        out.append(int(v))
    return np.asarray(out, dtype=np.int64)


# subcommands

def cmd_synth(args):
    if args.generator == "two-moons":
        prof = "graded" if args.graded is not None else "uniform"
        data, _ = generate_two_moons(args.n, args.noise, prof, args.graded, args.seed)
    elif args.generator == "clusters-with-outliers":
        data, _ = generate_clusters_with_outliers(args.n_dense, args.n_outliers, args.separation,
                                                  args.seed)
    else:
        data = generate_graded_line(args.n, args.ratio, args.length)
    log.info("synth %s seed %s", args.generator, getattr(args, "seed", None))
    save_dataset(data, args.output)
    return 0


def _density_field(args, data):
    if args.estimator == "knn":
        return density.knn_density(data, args.K)
    return density.parzen_density(data, _resolve_sigma(args.bandwidth, data))


def cmd_density(args):
    data = load_dataset(args.data)
    rho = _density_field(args, data)
    header, cols = ["rho"], [rho.clamped()]
    if args.adaptive:
        tau = density.DensityTransform(args.tau, args.alpha)
        bw = density.adaptive_bandwidth(rho, tau, data.dim, reference=_resolve_sigma(args.sigma, data))
        if bw.is_scalar:
            header.append("sigma")
            cols.append(bw.values)
    if args.weights:
        header.append("weight")
        cols.append(np.asarray(density.equalization_weights(rho)))
    if args.output:
        _write_csv(args.output, header, cols)
    else:
        print(_dumps({"estimator": rho.estimator, "param": rho.param,
                          "normalization": rho.normalization, "n": len(rho),
                          "min": float(cols[0].min()), "max": float(cols[0].max())}))
    return 0


def _build_kernel(args, data):
    fam = args.family
    if fam == "gaussian":
        return kernels.gaussian_kernel_matrix(data, _resolve_sigma(args.sigma, data))
    if fam == "adaptive":
        rho = density.knn_density(data, args.K)
        bw = density.adaptive_bandwidth(rho, None, data.dim, reference=_resolve_sigma(args.sigma, data))
        return kernels.adaptive_gaussian_kernel_matrix(data, bw)
    if fam == "knn":
        return kernels.knn_kernel_matrix(data, args.K)
    return kernels.zmp_kernel_matrix(data, None, args.K)


def _add_kernel_opts(p):
    p.add_argument("--family", choices=["gaussian", "adaptive", "knn", "zmp"], default="gaussian")
    p.add_argument("--sigma", type=_sigma_arg, default="scott",
                   help="fixed or reference bandwidth, or 'scott' (default)")
    p.add_argument("--K", type=int, default=10, help="neighbors for knn/zmp/adaptive kernels")


def cmd_kernel(args):
    data = load_dataset(args.data)
    A = _build_kernel(args, data)
    rep = kernels.check_psd(A)
    print(_dumps({"n": A.n, "spec": A.spec, "min_eigenvalue": rep.min_eigenvalue, "psd": rep.psd}))
    if args.output:
        kernels.save_matrix(A, args.output)
    return 0


def cmd_cluster(args):
    log.info("cluster run sha256 %s seed %s", _args_hash(args), args.seed)
    data = None
    if args.matrix:
        A = kernels.load_matrix(args.matrix)
        if args.data:
            data = load_dataset(args.data)
    else:
        if not args.data:
            raise UsageError("cluster: give a data file or --matrix")
        data = load_dataset(args.data)
        A = _build_kernel(args, data)
    w = None
    if args.weighting == "equalize":
        if data is None:
            raise ArgumentError("equalization weights need the data")
        if args.criterion == "nc":
            raise ArgumentError("equalization weights apply to the AA criterion only")
        w = np.asarray(density.equalization_weights(
            density.parzen_density(data, _resolve_sigma(args.sigma, data))))
    if args.optimizer == "brute":
        name = "nc" if args.criterion == "nc" else ("weighted_aa" if w is not None else "aa")
        part, energy = brute_force_partition(name, A, args.clusters, w=w)
        trace = [energy.value]
    else:
        res = multistart(A, args.clusters, w=w, restarts=args.restarts, seed=args.seed,
                         criterion=args.criterion, data=data, max_iter=args.max_iter)
        part, energy, trace = res.partition, res.energy, list(res.trace)
    log.info("energy trace %s", trace)
    _write_csv(args.output, ["label"], [part.assignment])
    out = {**energy.to_dict(), "trace": trace, "seed": args.seed}
    if args.energy:
        Path(args.energy).write_text(_dumps(out, indent=2) + "\n")
    print(_dumps({"energy": energy.value, "sizes": part.sizes().tolist()}))
    return 0


def cmd_embed(args):
    if args.mode == "curves":
        x = np.logspace(np.log10(args.x_min), np.log10(args.x_max), args.points)
        res = {k: embedding.density_transform_curves(k, x, args.sigma_t, args.h, args.N, args.Nbar,
                                                     args.eps) for k in ("eq58", "eq59")}
        if args.output:
            _write_csv(args.output, ["x", "tau_eq58", "tau_eq59"],
                       [x, res["eq58"].tau, res["eq59"].tau])
        print(_dumps({k: {"x_star": r.x_star, "x_star_exact": r.x_star_exact}
                          for k, r in res.items()}))
        return 0
    if not args.data:
        raise UsageError(f"embed {args.mode}: a data file is required")
    data = load_dataset(args.data)
    if args.mode == "euclidean":
        D = embedding.DistanceMatrix.from_points(data)
    elif args.mode == "geodesic":
        rho = density.knn_density(data, args.K)
        bw = density.adaptive_bandwidth(rho, None, data.dim, reference=_resolve_sigma(args.sigma, data))
        D = embedding.geodesic_proxy_distances(data, bw)
    else:
        s = _resolve_sigma(args.sigma, data)
        D = embedding.density_inversion_distances(data, kernels.gaussian_kernel_matrix(data, s), s)
    E = embedding.euclidean_embedding(D)
    Y = E.coords
    if args.dim:
        Y, _ = embedding.mds_project(E, args.dim)
    if args.output:
        _write_csv(args.output, [f"y{i}" for i in range(Y.shape[1])], list(Y.T))
    print(_dumps({"h": E.h, "dim": E.dim, "max_residual": E.max_residual}))
    return 0


def cmd_eval(args):
    if args.metric == "nmi":
        print(analysis.nmi(read_labels(args.a), read_labels(args.b)))
        return 0
    data = load_dataset(args.a)
    lab = read_labels(args.b)
    truth = data.labels
    if args.metric == "bias":
        rho = density.knn_density(data, args.K)
        rep = analysis.mode_isolation_report(lab, rho, None, truth)
        print(rep.to_json())
    else:
        idx = [int(t) for t in args.outliers.split(",") if t.strip()]
        rep = analysis.sparse_isolation_report(lab, data, idx, truth)
        print(_dumps(rep.to_dict()))
    return 0


def cmd_experiment(args):
    if args.list:
        print("\n".join(bundled_configs()))
        return 0
    if not args.config:
        raise UsageError("experiment: a config path or bundled name is required")
    p = Path(args.config)
    cfg = ExperimentConfig.from_file(p) if p.exists() else load_bundled(args.config)
    summary = run_experiment(cfg, args.out)
    print(_dumps(summary, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kernelbias", description="Density biases of kernel clustering.")
    ap.add_argument("-q", "--quiet", action="store_true", help="suppress run logging")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="generate synthetic data")
    gen = p.add_subparsers(dest="generator", parser_class=_Parser)
    gen.required = True
    g = gen.add_parser("two-moons")
    g.add_argument("--n", type=int, default=200, help="points per moon")
    g.add_argument("--noise", type=float, default=0.05)
    g.add_argument("--graded", type=float, default=None, metavar="RATIO",
                   help="density ratio between the densest and sparsest ends")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g = gen.add_parser("clusters-with-outliers")
    g.add_argument("--n-dense", type=int, default=6)
    g.add_argument("--n-outliers", type=int, default=2)
    g.add_argument("--separation", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g = gen.add_parser("graded-line")
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--ratio", type=float, default=20.0)
    g.add_argument("--length", type=float, default=1.0)
    g.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("density", help="density estimates, adaptive bandwidths, weights")
    p.add_argument("data")
    p.add_argument("--estimator", choices=["knn", "parzen"], default="knn")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--bandwidth", type=_sigma_arg, default="scott", help="Parzen bandwidth")
    p.add_argument("--adaptive", action="store_true", help="add density-law bandwidths")
    p.add_argument("--tau", choices=["constant", "identity", "log"], default="constant")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--sigma", type=_sigma_arg, default="scott", help="median adaptive bandwidth")
    p.add_argument("--weights", action="store_true", help="add equalization weights")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("kernel", help="build and export an affinity matrix")
    p.add_argument("data")
    _add_kernel_opts(p)
    p.add_argument("-o", "--output", help="binary matrix path (a .json sidecar is written too)")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("cluster", help="minimize AA or NC")
    p.add_argument("data", nargs="?")
    p.add_argument("--matrix", help="precomputed matrix written by 'kernel'")
    _add_kernel_opts(p)
    p.add_argument("--criterion", choices=["aa", "nc"], default="aa")
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--optimizer", choices=["lloyd", "brute"], default="lloyd")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--weighting", choices=["none", "equalize"], default="none")
    p.add_argument("-o", "--output", required=True, help="labels CSV")
    p.add_argument("--energy", help="energy report JSON")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("embed", help="Euclidean embedding, MDS and density-transform curves")
    p.add_argument("mode", choices=["euclidean", "geodesic", "inversion", "curves"])
    p.add_argument("data", nargs="?")
    p.add_argument("--sigma", type=_sigma_arg, default="scott")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--dim", type=int, default=None, help="MDS output dimension")
    p.add_argument("--sigma-t", type=float, default=0.5, help="curves: bandwidth")
    p.add_argument("--h", type=float, default=0.0, help="curves: additive constant")
    p.add_argument("--N", type=int, default=1, help="curves: data dimension")
    p.add_argument("--Nbar", type=float, default=20.0, help="curves: embedding dimension")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--x-min", type=float, default=1.0)
    p.add_argument("--x-max", type=float, default=1e5)
    p.add_argument("--points", type=int, default=2001)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="NMI and bias reports")
    p.add_argument("metric", choices=["nmi", "bias", "sparse"])
    p.add_argument("a", help="reference labels CSV (nmi) or the data file (bias, sparse)")
    p.add_argument("b", help="labels CSV to evaluate")
    p.add_argument("--K", type=int, default=10, help="neighbors for the mode density")
    p.add_argument("--outliers", default="", help="comma-separated outlier indices")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run a JSON experiment config")
    p.add_argument("config", nargs="?", help="config path or bundled name")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--list", action="store_true", help="list bundled configs")
    p.set_defaults(func=cmd_experiment)
    return ap


def _limit_threads():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return None
    try:
        k = int(n)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(k)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        _limit_threads()
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (KernelBiasError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
