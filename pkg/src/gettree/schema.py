"""JSON Schemas for the report files written by ``gettree --report``.

These are plain dicts so callers can validate with any JSON Schema
library; the package itself does not depend on one.
"""

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_NUM_LIST = {"type": "array", "items": _NUM}
_PARAMS = {
    "type": "object",
    "required": ["total"],
    "properties": {"total": {"type": "integer", "minimum": 0}},
}

TRAIN_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gettree train report",
    "type": "object",
    "required": ["config", "starts", "best_history", "best_hard_loss", "best_start",
                 "wall_time", "epochs", "parameters", "polish", "flags", "train_r2"],
    "properties": {
        "config": {
            "type": "object",
            "required": ["depth", "leaf_mode", "n_start", "n_epoch", "lam", "seed"],
        },
        "starts": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["start", "alphas", "soft_losses", "hard_losses",
                             "entry_digests", "exit_digests", "epochs", "status"],
                "properties": {
                    "alphas": _NUM_LIST,
                    "soft_losses": _NUM_LIST,
                    "hard_losses": _NUM_LIST,
                    "entry_digests": {"type": "array", "items": {"type": "string"}},
                    "exit_digests": {"type": "array", "items": {"type": "string"}},
                    "status": {"enum": ["ok", "failed"]},
                    "error": {"type": ["string", "null"]},
                },
            },
        },
        "best_history": {
            "type": "array",
            "items": {"type": "object", "required": ["start", "iteration", "loss"]},
        },
        "best_hard_loss": _NUM,
        "best_start": {"type": "integer"},
        "wall_time": _NUM,
        "epochs": {"type": "integer"},
        "parameters": _PARAMS,
        "polish": {
            "type": ["object", "null"],
            "required": ["initial_loss", "final_loss", "n_accepted", "steps"],
        },
        "flags": {"type": "object"},
        "train_r2": _NUM_OR_NULL,
        "validation_r2": _NUM_OR_NULL,
        "test_r2": _NUM_OR_NULL,
    },
}

TUNE_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gettree tune report",
    "type": "object",
    "required": ["flags", "model", "best_depth", "validation_r2"],
    "properties": {
        "flags": {"type": "object"},
        "model": {"enum": ["get", "get-linear", "cart", "rf"]},
        "best_depth": {"type": "integer", "minimum": 1},
        "validation_r2": {"type": "object", "additionalProperties": _NUM},
        "failures": {"type": "object", "additionalProperties": {"type": "string"}},
        "test_r2": _NUM_OR_NULL,
    },
}

_BENCH_ENTRY = {
    "type": "object",
    "required": ["status"],
    "oneOf": [
        {"properties": {"status": {"const": "ok"}},
         "required": ["test_r2", "depth", "n_trees", "parameters", "train_time",
                      "predict_time", "validation_r2"]},
        {"properties": {"status": {"const": "failed"}}, "required": ["error"]},
    ],
    "properties": {"parameters": _PARAMS, "test_r2": _NUM, "depth": {"type": ["integer", "null"]}},
}

BENCH_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "gettree bench report",
    "type": "object",
    "required": ["models", "datasets", "aggregate", "flags"],
    "properties": {
        "models": {"type": "array", "items": {"enum": ["get", "get-linear", "cart", "rf"]}},
        "datasets": {"type": "object",
                     "additionalProperties": {"type": "object", "additionalProperties": _BENCH_ENTRY}},
        "aggregate": {
            "type": "object",
            "required": ["mean_test_r2", "ttests"],
            "properties": {
                "mean_test_r2": {"type": "object", "additionalProperties": _NUM},
                "friedman_rank": {"type": "object", "additionalProperties": _NUM},
                "ttests": {"type": "object", "additionalProperties": {
                    "type": "object",
                    "required": ["t_statistic", "p_value", "dof", "ci95"],
                    "properties": {"p_value": {"type": "number", "minimum": 0, "maximum": 1}},
                }},
            },
        },
        "flags": {"type": "object"},
    },
}

REPORT_SCHEMAS = {"train": TRAIN_REPORT, "tune": TUNE_REPORT, "bench": BENCH_REPORT}
