"""Command-line experiment runner.

Each subcommand builds a report (emitted as JSON) and a fixed-column table
(emitted as CSV).  Parameters come from flags and optionally an INI file with
one section per subcommand; flags win.  Errors are written to stderr as JSON
and yield exit status 1.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gaussification as gf
from . import purification as pu
from . import subtraction as sb
from . import two_mode as tm
from .config import DistillationConfig, auto_raise
from .exceptions import DistillationError, InvalidParameterError, NoSqueezingExtractableError
from .fock import fidelity, load_state, purity, truncation_report
from .gaussian import coherent_state, quadrature_variances, squeezed_vacuum, suggested_dim

COMMANDS = ("distill", "optimize-sweep", "gaussify", "purify", "two-mode", "breed")
SWEEP_COLUMNS = ["vy_target", "P_succ", "T", "delta_sq", "alpha_sq", "reachable"]
ITER_COLUMNS = ["step", "vx", "vy", "residual", "probability", "tail_mass", "distance", "mean_n"]
DEFAULT_SWEEP = tuple(np.round(np.linspace(0.36, 0.21, 16), 12))


@dataclass
class Result:
    report: dict
    columns: list
    rows: list = field(default_factory=list)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: DistillationConfig
    out: str | None = None
    seed: int = 0
    format: str = "json"
    workers: int = 1
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------- serialization


def _num(x):
    """12-significant-digit float, None for non-finite values."""
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)) or obj is None or isinstance(obj, str):
        return bool(obj) if isinstance(obj, np.bool_) else obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _num(obj.real), "im": _num(obj.imag)}
    return _num(obj)


def _cell(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def emit(result: Result, fmt: str = "json", path: str | None = None) -> str:
    """Serialize as pretty JSON or header-first CSV; write to path or return the text."""
    if fmt == "json":
        text = json.dumps(_jsonable(result.report), indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(result.columns)
        for row in result.rows:
            w.writerow([_cell(row.get(c)) for c in result.columns])
        text = buf.getvalue()
    else:
        raise InvalidParameterError("format must be csv or json", format=fmt)
    if path:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror}", path=path) from None
    return text


class OutputError(DistillationError):
    kind = "io-error"


# ---------------------------------------------------------------- runners


def _variances_dict(v, prefix=""):
    return {f"{prefix}vx": v[0], f"{prefix}vy": v[1]}


def run_distill(cfg: ExperimentConfig) -> Result:
    p = cfg.params
    r, T = p.r, p.T
    rt = sb.reduced_squeeze(r, T)
    delta_sq = sb.optimal_delta_sq(rt) if p.delta_sq is None else p.delta_sq

    def attempt(dim):
        psi = squeezed_vacuum(r, dim)
        psi = psi / np.linalg.norm(psi)
        if T == 1.0:
            out, _ = _normalized(sb.subtracted_state(r, delta_sq, dim))
            prob = sb.success_probability_analytic(r, T, delta_sq)
            numeric_p = prob
        else:
            params = sb.SubtractionParams(delta_sq, T, alpha=p.alpha, eta=p.eta)
            oc = sb.realistic_subtraction(psi, params)
            out, numeric_p = oc.state, oc.probability
            prob = sb.success_probability_analytic(r, T, delta_sq) if p.eta == 1.0 and p.alpha is None else None
        return (out, numeric_p, prob), truncation_report(out, p.guard, p.tail_tol).clean

    (out, numeric_p, prob), dim = auto_raise(attempt, p.start_dim(), p.dim_cap)
    num = quadrature_variances(out, warn=False)
    ana = sb.subtracted_variances_analytic(rt, delta_sq)
    vy_in = float(np.exp(-2 * r))
    gain = vy_in / num[1]
    report = {
        "command": "distill",
        "params": p.to_dict(),
        "seed": cfg.seed,
        "dim": dim,
        "delta_sq": delta_sq,
        "reduced_r": rt,
        "input": {"vx": float(np.exp(2 * r)), "vy": vy_in},
        "output_numeric": _variances_dict(num),
        "output_analytic": _variances_dict(ana),
        "deltas": {"vx": abs(num[0] - ana[0]), "vy": abs(num[1] - ana[1])},
        "gain": gain,
        "gain_db": sb.gain_db(gain),
        "success_probability": numeric_p,
        "success_probability_analytic": prob,
        "purity": purity(out),
        "truncation": truncation_report(out, p.guard, p.tail_tol).to_dict(),
    }
    if cfg.extra.get("gaussify"):
        run = gf.gaussify_iterate(out, max_iters=p.max_iters, conv_tol=p.conv_tol, tail_tol=p.tail_tol)
        report["gaussify"] = run.to_dict()
        report["gaussify"]["predicted_r"] = gf.gaussified_squeeze_analytic(rt, delta_sq) if T == 1.0 else None
    row = {"r": r, "T": T, "delta_sq": delta_sq, "dim": dim, "vx": num[0], "vy": num[1],
           "vx_analytic": ana[0], "vy_analytic": ana[1], "gain": gain, "P_succ": numeric_p}
    return Result(report, list(row), [row])


def _normalized(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise DistillationError("subtraction annihilates the state")
    return v / n, n**2


def _sweep_point(args):
    r, vy = args
    try:
        res = sb.optimize_success(r, vy)
    except DistillationError:
        return {"vy_target": vy, "P_succ": float("nan"), "T": float("nan"), "delta_sq": float("nan"),
                "alpha_sq": float("nan"), "reachable": False}
    return {"vy_target": vy, "P_succ": res.probability, "T": res.T, "delta_sq": res.delta_sq,
            "alpha_sq": res.alpha_sq, "reachable": True}


def run_optimize_sweep(cfg: ExperimentConfig) -> Result:
    r = cfg.params.r
    if r <= 0:
        raise InvalidParameterError("input squeezing must be positive", r=r)
    grid = cfg.extra.get("vy_grid")
    if grid is None:
        grid = [cfg.params.target_vy] if cfg.params.target_vy is not None else list(DEFAULT_SWEEP)
    vy_in = float(np.exp(-2 * r))
    bad = [v for v in grid if not v < vy_in]
    if bad:
        raise InvalidParameterError("sweep targets must lie below the input variance",
                                    vy_in=vy_in, offending=bad)
    tasks = [(r, float(v)) for v in grid]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    report = {"command": "optimize-sweep", "r": r, "vy_in": vy_in, "seed": cfg.seed,
              "columns": SWEEP_COLUMNS, "rows": rows}
    return Result(report, SWEEP_COLUMNS, rows)


def _trace_rows(run: gf.GaussifyRun):
    return [r.to_dict() for r in run.records]


def run_gaussify(cfg: ExperimentConfig) -> Result:
    p = cfg.params
    path = cfg.extra.get("state")
    predicted = None
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                state = load_state(json.load(fh))
        except OSError as exc:
            raise OutputError(f"cannot read {path}: {exc.strerror}", path=path) from None
        except (ValueError, KeyError) as exc:
            raise InvalidParameterError(f"malformed state file: {exc}", path=path) from None
        source = {"state_file": path}
    else:
        delta_sq = sb.optimal_delta_sq(p.r) if p.delta_sq is None else p.delta_sq
        dim = p.dim if p.dim is not None else suggested_dim(p.r, cap=p.dim_cap)
        state, _ = _normalized(sb.subtracted_state(p.r, delta_sq, dim))
        predicted = gf.gaussified_squeeze_analytic(p.r, delta_sq)
        source = {"r": p.r, "delta_sq": delta_sq, "dim": dim}
    run = gf.gaussify_iterate(state, max_iters=p.max_iters, conv_tol=p.conv_tol, tail_tol=p.tail_tol)
    report = {"command": "gaussify", "seed": cfg.seed, "source": source,
              "predicted_r": predicted, "run": run.to_dict()}
    return Result(report, ITER_COLUMNS, _trace_rows(run))


def run_purify(cfg: ExperimentConfig) -> Result:
    p, ex = cfg.params, cfg.extra
    mode = ex.get("path", "filter")
    bound = None
    if ex.get("alpha") is not None:
        alpha = complex(ex["alpha"])
        start = p.dim or 30

        def make(dim):
            v = coherent_state(alpha, dim)
            return v / np.linalg.norm(v), truncation_report(v, p.guard, p.tail_tol).clean

        rho, dim = auto_raise(make, start, p.dim_cap)
        source = {"coherent_alpha": alpha}
    else:
        if ex.get("vx") is not None and ex.get("vy") is not None:
            mp = pu.MixedSqueezedParams.from_variances(ex["vx"], ex["vy"])
        elif ex.get("r0") is not None and ex.get("t0") is not None:
            mp = pu.MixedSqueezedParams.from_loss(ex["r0"], ex["t0"])
        else:
            raise InvalidParameterError("purify needs --alpha, --vx/--vy or --r0/--t0")
        dim = p.dim or suggested_dim(mp.r0, cap=p.dim_cap)
        rho = mp.state(dim)
        source = {"vx": mp.vx, "vy": mp.vy, "r0": mp.r0, "T0": mp.T0}
        bound = pu.v_min_bound(mp.vx, mp.vy)
    report = {"command": "purify", "seed": cfg.seed, "path": mode, "source": source, "dim": dim}
    if mode == "filter":
        run = pu.purify_pipeline(rho, max_iters=p.max_iters, conv_tol=p.conv_tol)
        report.update({"filter_weight": run.metadata["filter_weight"],
                       "predicted_r": run.metadata["predicted_r"]})
    elif mode == "m":
        if "r0" not in source:
            raise InvalidParameterError("the M path needs a mixed squeezed input")
        delta_sq = sb.optimal_delta_sq(source["r0"]) if p.delta_sq is None else p.delta_sq
        run = pu.subtract_and_gaussify(rho, delta_sq, max_iters=p.max_iters, conv_tol=p.conv_tol)
        report.update({"delta_sq": delta_sq, "subtraction_weight": run.metadata["subtraction_weight"]})
    else:
        raise InvalidParameterError("path must be filter or m", path=mode)
    final_vy = run.final_variances[1]
    report.update({
        "final_purity": purity(run.final),
        "fitted_r": run.fitted_r,
        "final_vx": run.final_variances[0],
        "final_vy": final_vy,
        "v_min_bound": bound,
        "bound_respected": None if bound is None else bool(final_vy >= bound - 1e-6),
        "run": run.to_dict(),
    })
    return Result(report, ITER_COLUMNS, _trace_rows(run))


def run_two_mode(cfg: ExperimentConfig) -> Result:
    p = cfg.params
    r = p.r
    dim = p.dim or 40
    tmsv = tm.tmsv_state(r, dim)
    oc = tm.joint_subtract(tmsv)
    rho = tm.decouple_and_reduce(oc.state)
    num_v = quadrature_variances(rho, warn=False)
    ana_v = tm.reduced_variances_analytic(r)
    num_p, ana_p = purity(rho), tm.reduced_purity_analytic(r)
    gen = tm.tmsv_from_squeezers(r, dim)
    cmp = tm.compare_single_vs_two_mode(r) if r > 0 else None
    row = {"r": r, "dim": dim, "purity": num_p, "purity_analytic": ana_p, "vx": num_v[0], "vy": num_v[1],
           "vx_analytic": ana_v[0], "vy_analytic": ana_v[1], "vy_input": float(np.exp(-2 * r))}
    report = {"command": "two-mode", "seed": cfg.seed, **row,
              "joint_probability": oc.probability,
              "generation_fidelity": fidelity(tmsv.data / np.linalg.norm(tmsv.data),
                                              gen.data / np.linalg.norm(gen.data)),
              "comparison": cmp.to_dict() if cmp else None}
    return Result(report, list(row), [row])


def run_breed(cfg: ExperimentConfig) -> Result:
    p, ex = cfg.params, cfg.extra
    r = p.r
    x = float(ex.get("x", 0.0))
    if ex.get("scale", "x") == "X":
        x = x / np.sqrt(2)
    quad = ex.get("quadrature", "x")
    window = ex.get("window")
    dim = p.dim or 40
    oc = tm.breed_gkp(r, x, dim, quadrature=quad, window=window)
    row = {"r": r, "x": x, "dim": dim, "heralding_density": oc.probability}
    fit = tm.fit_manifold(oc.state if oc.state.ndim == 1 else _top_vector(oc.state))
    row.update({"manifold_r": fit.r, "manifold_residual": fit.residual})
    if quad == "x" and window is None:
        cf = tm.breeding_closed_form(r, x, dim)
        row["closed_form_fidelity"] = fidelity(oc.state, cf / np.linalg.norm(cf))
    report = {"command": "breed", "seed": cfg.seed, "quadrature": quad, "window": window,
              "vacuum_root_x": float(np.exp(r) / np.sqrt(2)),
              "truncation": oc.metadata["truncation"], **row}
    return Result(report, list(row), [row])


def _top_vector(rho):
    w, v = np.linalg.eigh(rho)
    return v[:, -1]


RUNNERS = {"distill": run_distill, "optimize-sweep": run_optimize_sweep, "gaussify": run_gaussify,
           "purify": run_purify, "two-mode": run_two_mode, "breed": run_breed}


# ---------------------------------------------------------------- argument handling

PARAM_KEYS = {"r": float, "delta_sq": None, "transmittance": float, "eta": float, "target_vy": float,
              "dim": int, "max_iters": int}
EXTRA_KEYS = {"alpha": complex, "vx": float, "vy": float, "r0": float, "t0": float, "path": str,
              "x": float, "quadrature": str, "scale": str, "window": float, "vy_grid": None,
              "state": str, "gaussify": None}
META_KEYS = {"format": str, "out": str, "workers": int, "seed": int}


def _parse_delta(text):
    if isinstance(text, (int, float)):
        return float(text)
    return None if str(text).strip().lower() == "opt" else float(text)


def _parse_grid(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _parse_bool(text):
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _convert(key, value):
    if key == "delta_sq":
        return _parse_delta(value)
    if key == "vy_grid":
        return _parse_grid(value)
    if key == "gaussify":
        return _parse_bool(value)
    kind = PARAM_KEYS.get(key) or EXTRA_KEYS.get(key) or META_KEYS.get(key)
    if kind is complex:
        return complex(str(value).replace(" ", ""))
    return kind(value)


def read_config_file(path: str, command: str) -> dict:
    """Values from the DEFAULT and ``[command]`` sections of an INI file."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc.strerror}", path=path) from None
    except configparser.Error as exc:
        raise InvalidParameterError(f"malformed config file: {exc}", path=path) from None
    items = dict(cp.defaults())
    if cp.has_section(command):
        items.update(cp.items(command))
    out = {}
    for key, value in items.items():
        k = key.strip().replace("-", "_")
        if k not in PARAM_KEYS and k not in EXTRA_KEYS and k not in META_KEYS:
            raise InvalidParameterError(f"unknown config key {key!r}", section=command, key=key)
        try:
            out[k] = _convert(k, value)
        except ValueError:
            raise InvalidParameterError(f"bad value for {key!r}", key=key, value=value) from None
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="squeezedistill",
                                 description="Squeezing distillation and purification experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--r", type=float)
        sp.add_argument("--delta-sq", dest="delta_sq", type=_parse_delta, help="float or 'opt'")
        sp.add_argument("--transmittance", type=float)
        sp.add_argument("--eta", type=float)
        sp.add_argument("--target-vy", dest="target_vy", type=float)
        sp.add_argument("--dim", type=int)
        sp.add_argument("--max-iters", dest="max_iters", type=int)
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--out")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int)
        if name == "distill":
            sp.add_argument("--gaussify", action="store_true", default=None)
        if name == "optimize-sweep":
            sp.add_argument("--vy-grid", dest="vy_grid", type=_parse_grid, help="comma-separated targets")
        if name == "gaussify":
            sp.add_argument("--state", help="JSON state file")
        if name == "purify":
            sp.add_argument("--alpha", type=complex, help="coherent input amplitude")
            sp.add_argument("--vx", type=float)
            sp.add_argument("--vy", type=float)
            sp.add_argument("--r0", type=float)
            sp.add_argument("--t0", type=float)
            sp.add_argument("--path", choices=("filter", "m"))
        if name == "breed":
            sp.add_argument("--x", type=float)
            sp.add_argument("--scale", choices=("x", "X"), help="x = X/sqrt2 (default) or X")
            sp.add_argument("--quadrature", choices=("x", "p"))
            sp.add_argument("--window", type=float)
    return ap


def make_config(ns: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(ns.config, ns.command) if ns.config else {}
    for key, value in vars(ns).items():
        if key in ("command", "config") or value is None:
            continue
        values[key] = value
    params = {"r": values.get("r", 0.5), "delta_sq": values.get("delta_sq"),
              "T": values.get("transmittance", 1.0), "eta": values.get("eta", 1.0),
              "target_vy": values.get("target_vy"), "dim": values.get("dim"),
              "max_iters": values.get("max_iters", gf.MAX_ITERS)}
    workers = values.get("workers", 1)
    if workers < 1:
        raise InvalidParameterError("workers must be at least 1", workers=workers)
    extra = {k: values[k] for k in EXTRA_KEYS if k in values}
    return ExperimentConfig(ns.command, DistillationConfig(**params), values.get("out"),
                            values.get("seed", 0), values.get("format", "json"), workers, extra)


def run(cfg: ExperimentConfig) -> Result:
    np.random.seed(cfg.seed)
    return RUNNERS[cfg.command](cfg)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = make_config(ns)
        text = emit(run(cfg), cfg.format, cfg.out)
    except DistillationError as exc:
        print(json.dumps(_jsonable(exc.to_dict()), sort_keys=True), file=sys.stderr)
        return 1
    if not cfg.out:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
