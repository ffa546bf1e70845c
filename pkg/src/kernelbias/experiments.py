"""Experiment configs and the pipeline that runs them."""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
from scipy.spatial.distance import pdist

from . import analysis, density, embedding, kernels
from .clustering import brute_force_partition, multistart
from .dataset import (DataSet, generate_clusters_with_outliers, generate_graded_line,
                      generate_two_moons, load_dataset)
from .errors import ArgumentError, KernelBiasError

__all__ = ["ExperimentConfig", "run_experiment", "bundled_configs", "load_bundled", "SCHEMA",
           "CONFIG_VERSION"]

log = logging.getLogger("kernelbias")

CONFIG_VERSION = 1
TASKS = ("cluster", "bandwidth_sweep", "transform_curves", "density_inversion",
         "embedding_equalization")
GENERATORS = {
    "two_moons": generate_two_moons,
    "clusters_with_outliers": generate_clusters_with_outliers,
    "graded_line": generate_graded_line,
}

_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_sigma = {"oneOf": [_pos, {"const": "scott"}]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "version": {"const": CONFIG_VERSION},
    "name": {"type": "string"},
    "description": {"type": "string"},
    "task": {"enum": list(TASKS)},
    "dataset": {"oneOf": [
        _obj({"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}}, ["path"]),
        _obj({"generator": {"enum": list(GENERATORS)}, "params": {"type": "object"}},
             ["generator"]),
    ]},
    "density": _obj({
        "estimator": {"enum": ["knn", "parzen"]},
        "K": _posint,
        "bandwidth": _sigma,
    }),
    "kernel": _obj({
        "family": {"enum": ["gaussian", "adaptive_gaussian", "knn", "zmp"]},
        "sigma": _sigma,
        "sigma_scale": _pos,
        "K": _posint,
        "tau": {"enum": ["constant", "identity", "log"]},
        "alpha": _pos,
    }, ["family"]),
    "criterion": {"enum": ["aa", "nc"]},
    "K": {"type": "integer", "minimum": 1},
    "weighting": {"enum": ["none", "equalize"]},
    "optimizer": _obj({
        "method": {"enum": ["lloyd", "brute"]},
        "restarts": _posint,
        "seed": {"type": "integer", "minimum": 0},
        "max_iter": _posint,
        "tol": {"type": "number", "minimum": 0},
    }),
    "sweep": _obj({
        "reference": {"enum": ["scott", "diameter"]},
        "scales": {"type": "array", "items": _pos, "minItems": 1},
    }, ["scales"]),
    "curves": _obj({
        "sigma": _pos, "h": {"type": "number", "minimum": 0}, "N": _posint,
        "Nbar": _pos, "eps": _pos, "x_min": {"type": "number", "minimum": 1},
        "x_max": _pos, "points": {"type": "integer", "minimum": 3},
    }),
    "analysis": _obj({
        "sparse_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "outlier_indices": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    }),
    "outputs": _obj({
        "labels": {"type": ["string", "null"]},
        "energy": {"type": ["string", "null"]},
        "report": {"type": ["string", "null"]},
        "plot": {"type": ["string", "null"]},
    }),
}, ["version", "task"])

_DEFAULTS = {
    "density": {"estimator": "knn", "K": 10, "bandwidth": "scott"},
    "criterion": "aa",
    "K": 2,
    "weighting": "none",
    "optimizer": {"method": "lloyd", "restarts": 10, "seed": 0, "max_iter": 100, "tol": 1e-9},
    "sweep": {"reference": "scott"},
    "curves": {"sigma": 0.5, "h": 0.0, "N": 1, "Nbar": 20.0, "eps": 1.0, "x_min": 1.0,
               "x_max": 1e5, "points": 2001},
    "analysis": {"sparse_fraction": 0.5},
    "outputs": {"labels": "labels.csv", "energy": "energy.json", "report": "report.json",
                "plot": None},
}

# tasks that need these sections
_NEEDS = {
    "cluster": ("dataset", "kernel"),
    "bandwidth_sweep": ("dataset", "sweep"),
    "transform_curves": (),
    "density_inversion": ("dataset", "kernel"),
    "embedding_equalization": ("dataset",),
}


@contextmanager
def _stage(name):
    """Prefix errors raised inside a pipeline stage with the stage name."""
    try:
        yield
    except KernelBiasError as e:
        if getattr(e, "stage", None):
            raise
        err = type(e)(f"[{name}] {e}")
        err.stage = name
        raise err from e


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description.

    ``raw`` is the JSON document as written; ``base_dir`` resolves relative
    dataset paths. Missing optional sections take their defaults in
    :meth:`section`.
    """

    raw: dict
    base_dir: Path = Path(".")

    def __post_init__(self):
        object.__setattr__(self, "raw", copy.deepcopy(self.raw))
        object.__setattr__(self, "base_dir", Path(self.base_dir))
        self.validate()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ArgumentError(f"config {path} not found") from None
        except json.JSONDecodeError as e:
            raise ArgumentError(f"config {path} is not valid JSON: {e}") from None
        return cls(raw, path.parent)

    def validate(self) -> None:
        try:
            jsonschema.validate(self.raw, SCHEMA)
        except jsonschema.ValidationError as e:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            raise ArgumentError(f"invalid config at {where}: {e.message}") from None
        task = self.raw["task"]
        for sec in _NEEDS[task]:
            if sec not in self.raw:
                raise ArgumentError(f"task {task!r} needs a {sec!r} section")
        ds = self.raw.get("dataset", {})
        if "path" in ds and not self.dataset_path.exists():
            raise ArgumentError(f"dataset file {self.dataset_path} not found")
        if "generator" in ds:
            import inspect

            allowed = set(inspect.signature(GENERATORS[ds["generator"]]).parameters)
            unknown = set(ds.get("params", {})) - allowed
            if unknown:
                raise ArgumentError(f"unknown {ds['generator']} parameters {sorted(unknown)}")
        kern = self.raw.get("kernel", {})
        if kern.get("family") in ("knn", "zmp") and "K" not in kern:
            raise ArgumentError(f"{kern['family']} kernel needs K")
        if self.raw.get("criterion") == "nc" and self.raw.get("weighting", "none") != "none":
            raise ArgumentError("equalization weights apply to the AA criterion only")
        cur = self.section("curves")
        if cur["x_max"] <= cur["x_min"]:
            raise ArgumentError("curves.x_max must exceed curves.x_min")

    @property
    def task(self) -> str:
        return self.raw["task"]

    @property
    def name(self) -> str:
        return self.raw.get("name", self.task)

    @property
    def dataset_path(self) -> Path:
        p = Path(self.raw["dataset"]["path"])
        return p if p.is_absolute() else self.base_dir / p

    def section(self, key):
        default = _DEFAULTS.get(key)
        val = self.raw.get(key)
        if isinstance(default, dict):
            return {**default, **(val or {})}
        return default if val is None else val

    def hash(self) -> str:
        """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def bundled_configs() -> list:
    """Names of the example configs shipped with the package."""
    root = resources.files("kernelbias") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str) -> ExperimentConfig:
    root = resources.files("kernelbias") / "configs"
    f = root / (name if name.endswith(".json") else name + ".json")
    if not f.is_file():
        raise ArgumentError(f"no bundled config {name!r}; have {bundled_configs()}")
    return ExperimentConfig(json.loads(f.read_text()), Path("."))


# pipeline pieces

def _build_dataset(cfg):
    ds = cfg.raw["dataset"]
    if "path" in ds:
        data = load_dataset(cfg.dataset_path, ds.get("format"))
        return data, data.labels
    out = GENERATORS[ds["generator"]](**ds.get("params", {}))
    if isinstance(out, tuple):
        data, truth = out
        return data, truth.assignment
    return out, None


def _outliers(cfg, data):
    an = cfg.section("analysis")
    if "outlier_indices" in an:
        return list(an["outlier_indices"])
    ds = cfg.raw.get("dataset", {})
    if ds.get("generator") == "clusters_with_outliers":
        m = ds.get("params", {}).get("n_outliers", 0)
        return list(range(data.n - m, data.n))
    return None


def _density(cfg, data):
    sec = cfg.section("density")
    if sec["estimator"] == "knn":
        return density.knn_density(data, sec["K"])
    bw = sec["bandwidth"]
    bw = density.scott_scalar(data) if bw == "scott" else float(bw)
    return density.parzen_density(data, bw)


def _sigma(kern, data):
    s = kern.get("sigma", "scott")
    s = density.scott_scalar(data) if s == "scott" else float(s)
    return s * kern.get("sigma_scale", 1.0)


def _kernel(kern, data, rho):
    fam = kern["family"]
    if fam == "gaussian":
        return kernels.gaussian_kernel_matrix(data, _sigma(kern, data))
    if fam == "adaptive_gaussian":
        tau = density.DensityTransform(kern.get("tau", "constant"), kern.get("alpha", 1.0))
        bw = density.adaptive_bandwidth(rho, tau, data.dim, reference=_sigma(kern, data))
        return kernels.adaptive_gaussian_kernel_matrix(data, bw)
    if fam == "knn":
        return kernels.knn_kernel_matrix(data, kern["K"])
    return kernels.zmp_kernel_matrix(data, None, kern["K"])


def _optimize(cfg, A, w, data):
    opt = cfg.section("optimizer")
    crit, K = cfg.section("criterion"), cfg.section("K")
    if opt["method"] == "brute":
        name = "nc" if crit == "nc" else ("weighted_aa" if w is not None else "aa")
        part, rep = brute_force_partition(name, A, K, w=w)
        return part, rep, {"trace": [rep.value], "method": "brute"}
    res = multistart(A, K, w=w, restarts=opt["restarts"], seed=opt["seed"], criterion=crit,
                     data=data, max_iter=opt["max_iter"], tol=opt["tol"])
    extra = {"trace": list(res.trace), "method": "lloyd", "init": res.init,
             "restart": res.restart, "restart_energies": list(res.restart_energies),
             "n_iter": res.n_iter, "converged": res.converged, "shift": res.shift}
    return res.partition, res.energy, extra


def _write_csv(path, header, columns):
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in zip(*cols):
            wr.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (np.integer, int, np.bool_, bool)):
        return str(int(v))
    return repr(float(v))


def to_json_safe(obj):
    """Copy of ``obj`` with numpy values converted and NaN/inf replaced by None."""
    if isinstance(obj, dict):
        return {k: to_json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_safe(v) for v in obj]
    if isinstance(obj, (np.ndarray, np.generic)):
        return to_json_safe(obj.tolist())
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_json(path, obj):
    Path(path).write_text(json.dumps(to_json_safe(obj), indent=2, sort_keys=True,
                                     allow_nan=False) + "\n")


def _plot_coords(data):
    if data.dim == 2:
        return data.points
    if data.dim == 1:
        return np.hstack([data.points, np.zeros((data.n, 1))])
    Y, _ = embedding.mds_project(embedding.DistanceMatrix.from_points(data), 2)
    return Y


def _cluster_once(cfg, data, truth, kern):
    with _stage("density"):
        rho = _density(cfg, data)
        w = None
        if cfg.section("weighting") == "equalize":
            w = np.asarray(density.equalization_weights(rho))
    with _stage("kernel"):
        A = _kernel(kern, data, rho)
    with _stage("optimize"):
        part, energy, extra = _optimize(cfg, A, w, data)
    with _stage("analysis"):
        bias = analysis.mode_isolation_report(part, rho, A, truth)
    return part, energy, extra, bias


def _task_cluster(cfg, data, truth, out):
    part, energy, extra, bias = _cluster_once(cfg, data, truth, cfg.raw["kernel"])
    log.info("energy trace %s", extra["trace"])
    report = {"bias": bias.to_dict()}
    outl = _outliers(cfg, data)
    if outl is not None and part.K == 2:
        with _stage("analysis"):
            report["sparse_isolation"] = analysis.sparse_isolation_report(
                part, data, outl, truth).to_dict()
    summary = {"nmi": bias.nmi, "mode_in_minority": bias.mode_in_minority,
               "minority_fraction": bias.minority_fraction, "energy": energy.value}
    if "sparse_isolation" in report:
        summary["sparse_isolated"] = report["sparse_isolation"]["isolated"]
    out.labels(["label"], [part.assignment])
    out.energy({**energy.to_dict(), **extra})
    out.report(report)
    xy = _plot_coords(data)
    out.plot(["x", "y", "label"], [xy[:, 0], xy[:, 1], part.assignment])
    return summary


def _task_sweep(cfg, data, truth, out):
    sw = cfg.section("sweep")
    kern = dict(cfg.raw.get("kernel", {"family": "gaussian"}))
    if kern["family"] not in ("gaussian", "adaptive_gaussian"):
        raise ArgumentError("bandwidth sweeps need a Gaussian kernel family")
    if sw["reference"] == "scott":
        ref = density.scott_scalar(data)
    else:
        ref = float(pdist(data.points).max())
    rows, labels, energies = [], [], []
    for s in sw["scales"]:
        kern.update(sigma=ref * s, sigma_scale=1.0)
        part, energy, extra, bias = _cluster_once(cfg, data, truth, kern)
        log.info("sigma %.6g energy trace %s", ref * s, extra["trace"])
        rows.append({"scale": s, "sigma": ref * s, **bias.to_dict(), "energy": energy.value})
        labels.append(part.assignment)
        energies.append({"sigma": ref * s, **energy.to_dict(), **extra})
    out.labels([f"sigma_{i}" for i in range(len(labels))], labels)
    out.energy({"runs": energies})
    out.report({"reference": sw["reference"], "reference_value": ref, "runs": rows})
    out.plot(["scale", "sigma", "nmi", "minority_fraction", "mode_in_minority"],
             [[r["scale"] for r in rows], [r["sigma"] for r in rows],
              [np.nan if r["nmi"] is None else r["nmi"] for r in rows],
              [r["minority_fraction"] for r in rows], [r["mode_in_minority"] for r in rows]])
    return {"runs": [{k: r[k] for k in ("scale", "nmi", "mode_in_minority")} for r in rows]}


def _task_curves(cfg, out):
    c = cfg.section("curves")
    x = np.logspace(np.log10(c["x_min"]), np.log10(c["x_max"]), c["points"])
    kw = {k: c[k] for k in ("sigma", "h", "N", "Nbar", "eps")}
    res = {k: embedding.density_transform_curves(k, x, **kw) for k in ("eq58", "eq59")}
    report = {k: {"interior_minima": list(r.interior_minima), "x_star": r.x_star,
                  "x_star_exact": r.x_star_exact} for k, r in res.items()}
    out.report(report)
    out.plot(["x", "tau_eq58", "tau_eq59"], [x, res["eq58"].tau, res["eq59"].tau])
    return {k: v["x_star"] for k, v in report.items()}


def _task_inversion(cfg, data, out):
    kern = cfg.raw["kernel"]
    if kern["family"] != "gaussian":
        raise ArgumentError("density inversion is defined for the fixed Gaussian kernel")
    sigma = _sigma(kern, data)
    with _stage("kernel"):
        A = kernels.gaussian_kernel_matrix(data, sigma)
    with _stage("embedding"):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            Dh = embedding.density_inversion_distances(data, A, sigma)
        E = embedding.euclidean_embedding(Dh)
    with _stage("analysis"):
        rho0 = np.asarray(_density(cfg, data))
        rho1 = np.asarray(_density(cfg, DataSet(E.coords)))
        m = max(2, int(round(cfg.section("analysis")["sparse_fraction"] * data.n)))
        sparse = np.argsort(rho0, kind="stable")[:m]
        corr_sparse = analysis.spearman(rho0[sparse], rho1[sparse])
        corr_all = analysis.spearman(rho0, rho1)
    report = {"sigma": sigma, "h": E.h, "dim": E.dim, "max_residual": E.max_residual,
              "negative_entries": bool(caught), "spearman_sparse": corr_sparse,
              "spearman_all": corr_all, "sparse_count": m}
    out.report(report)
    Y, _ = embedding.mds_project(E, 1)
    out.plot(["x", "embedded", "rho", "rho_embedded"], [data.points[:, 0], Y[:, 0], rho0, rho1])
    return {"spearman_sparse": corr_sparse, "h": E.h}


def _task_equalization(cfg, data, out):
    sec = cfg.section("density")
    kern = cfg.raw.get("kernel", {"family": "adaptive_gaussian"})
    with _stage("density"):
        rho = _density(cfg, data)
        tau = density.DensityTransform(kern.get("tau", "constant"), kern.get("alpha", 1.0))
        bw = density.adaptive_bandwidth(rho, tau, data.dim, reference=_sigma(kern, data))
    with _stage("embedding"):
        G = embedding.geodesic_proxy_distances(data, bw)
        E = embedding.euclidean_embedding(G)
    K = sec["K"]
    cv0 = analysis.coefficient_of_variation(density.knn_radius(data, K))
    cv1 = analysis.coefficient_of_variation(density.knn_radius(E.coords, K))
    report = {"h": E.h, "dim": E.dim, "max_residual": E.max_residual, "knn_K": K,
              "radius_cv_original": cv0, "radius_cv_embedded": cv1, "cv_ratio": cv1 / cv0}
    out.report(report)
    Y, _ = embedding.mds_project(E, 2)
    out.plot(["x", "y"], [Y[:, 0], Y[:, 1]])
    return {"cv_ratio": cv1 / cv0, "max_residual": E.max_residual}


class _Outputs:
    def __init__(self, cfg, out_dir):
        self.sec = cfg.section("outputs")
        self.dir = Path(out_dir)
        self.written = {}

    def _path(self, key):
        name = self.sec.get(key)
        if not name:
            return None
        p = Path(name)
        p = p if p.is_absolute() else self.dir / p
        p.parent.mkdir(parents=True, exist_ok=True)
        self.written[key] = str(p)
        return p

    def labels(self, header, cols):
        p = self._path("labels")
        if p:
            _write_csv(p, header, cols)

    def energy(self, obj):
        p = self._path("energy")
        if p:
            _write_json(p, obj)

    def report(self, obj):
        p = self._path("report")
        if p:
            _write_json(p, obj)

    def plot(self, header, cols):
        p = self._path("plot")
        if p:
            _write_csv(p, header, cols)


def run_experiment(cfg, out_dir=".") -> dict:
    """Run a config end to end and write its artifacts into ``out_dir``.

    Returns a summary dict with the config name, hash, the key results of
    the task and the paths written. Errors from the library are re-raised
    with the failing stage prefixed to the message.
    """
    if not isinstance(cfg, ExperimentConfig):
        cfg = ExperimentConfig(cfg)
    h = cfg.hash()
    opt = cfg.section("optimizer")
    log.info("experiment %s task %s config sha256 %s seed %s", cfg.name, cfg.task, h, opt["seed"])
    out = _Outputs(cfg, out_dir)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    if cfg.task == "transform_curves":
        with _stage("curves"):
            result = _task_curves(cfg, out)
    else:
        with _stage("dataset"):
            data, truth = _build_dataset(cfg)
        if cfg.task == "cluster":
            result = _task_cluster(cfg, data, truth, out)
        elif cfg.task == "bandwidth_sweep":
            result = _task_sweep(cfg, data, truth, out)
        elif cfg.task == "density_inversion":
            result = _task_inversion(cfg, data, out)
        else:
            result = _task_equalization(cfg, data, out)
    return {"name": cfg.name, "task": cfg.task, "config_sha256": h, "seed": opt["seed"],
            "result": result, "outputs": out.written}
