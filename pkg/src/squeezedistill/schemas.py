"""JSON schemas of the CLI reports (draft 2020-12)."""
from __future__ import annotations

NUM = {"type": ["number", "null"]}
VAR = {"type": "object", "required": ["vx", "vy"],
       "properties": {"vx": {"type": "number"}, "vy": {"type": "number"}}}
TRUNCATION = {"type": "object", "required": ["tail_mass", "guard", "tail_tol", "dim", "clean"]}
ITERATION = {"type": "object",
             "required": ["step", "vx", "vy", "residual", "probability", "tail_mass", "distance", "mean_n"]}
RUN = {
    "type": "object",
    "required": ["converged", "diverged", "truncation_limited", "steps", "final_vx", "final_vy",
                 "final_residual", "fitted_r", "iterations"],
    "properties": {
        "converged": {"type": "boolean"},
        "diverged": {"type": "boolean"},
        "truncation_limited": {"type": "boolean"},
        "steps": {"type": "integer", "minimum": 0},
        "fitted_r": NUM,
        "iterations": {"type": "array", "items": ITERATION},
    },
}

DISTILL = {
    "type": "object",
    "required": ["command", "params", "dim", "delta_sq", "input", "output_numeric", "output_analytic",
                 "deltas", "gain", "gain_db", "success_probability", "truncation"],
    "properties": {
        "command": {"const": "distill"},
        "dim": {"type": "integer", "minimum": 2, "maximum": 200},
        "input": VAR,
        "output_numeric": VAR,
        "output_analytic": VAR,
        "deltas": VAR,
        "gain": {"type": "number"},
        "success_probability": NUM,
        "truncation": TRUNCATION,
        "gaussify": RUN,
    },
}

SWEEP_ROW = {
    "type": "object",
    "required": ["vy_target", "P_succ", "T", "delta_sq", "alpha_sq", "reachable"],
    "properties": {"vy_target": {"type": "number"}, "P_succ": NUM, "T": NUM, "delta_sq": NUM,
                   "alpha_sq": NUM, "reachable": {"type": "boolean"}},
}
OPTIMIZE_SWEEP = {
    "type": "object",
    "required": ["command", "r", "vy_in", "columns", "rows"],
    "properties": {"command": {"const": "optimize-sweep"}, "rows": {"type": "array", "items": SWEEP_ROW}},
}

GAUSSIFY = {
    "type": "object",
    "required": ["command", "source", "predicted_r", "run"],
    "properties": {"command": {"const": "gaussify"}, "run": RUN, "predicted_r": NUM},
}

PURIFY = {
    "type": "object",
    "required": ["command", "path", "source", "dim", "final_purity", "fitted_r", "final_vx", "final_vy",
                 "v_min_bound", "bound_respected", "run"],
    "properties": {"command": {"const": "purify"}, "path": {"enum": ["filter", "m"]}, "run": RUN,
                   "final_purity": {"type": "number"}, "v_min_bound": NUM,
                   "bound_respected": {"type": ["boolean", "null"]}},
}

TWO_MODE = {
    "type": "object",
    "required": ["command", "r", "dim", "purity", "purity_analytic", "vx", "vy", "vx_analytic",
                 "vy_analytic", "joint_probability", "generation_fidelity"],
    "properties": {"command": {"const": "two-mode"}},
}

BREED = {
    "type": "object",
    "required": ["command", "r", "x", "dim", "heralding_density", "manifold_r", "manifold_residual",
                 "vacuum_root_x", "truncation"],
    "properties": {"command": {"const": "breed"}, "truncation": TRUNCATION},
}

ERROR = {
    "type": "object",
    "required": ["error", "message", "params"],
    "properties": {"error": {"type": "string"}, "message": {"type": "string"}, "params": {"type": "object"}},
}

REPORT_SCHEMAS = {"distill": DISTILL, "optimize-sweep": OPTIMIZE_SWEEP, "gaussify": GAUSSIFY,
                  "purify": PURIFY, "two-mode": TWO_MODE, "breed": BREED}
