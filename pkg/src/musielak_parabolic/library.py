"""Shipped model configurations.

Each entry is a problem block in the JSON config schema; constants are the
ones the sampled validators accept.
"""
import copy

HEAT_LIMIT = {
    "b": {"kind": "linear", "params": {"slope": 1.0}},
    "a": {"kind": "linear", "params": {"coef": 1.0}},
    "K": {"kind": "zero"},
    "phi": {"kind": "power", "params": {"exponent": 2.0, "scale": 0.5}},
    "f": {"kind": "zero"},
    "u0": {"kind": "sine"},
    "constants": {"b0": 0.75, "nu": 2.0, "nu0": 0.1, "nu1": 0.1, "lambda": 1.0},
}

# b' = 1.5 + 0.2 cos(s) lies in [1.3, 1.7] inside (b0, 2 b0) = (1, 2)
P_LAPLACIAN = {
    "b": {"kind": "linear-sine", "params": {"slope": 1.5, "amplitude": 0.2}},
    "a": {"kind": "p-laplacian", "params": {"exponent_expr": [2.0, 0.5]}},
    "K": {"kind": "zero"},
    "phi": {"kind": "variable-power", "params": {"exponent_expr": [2.0, 0.5]}},
    "f": {"kind": "constant", "params": {"value": 1.0}},
    "u0": {"kind": "sine"},
    "constants": {"b0": 1.0, "nu": 1.0, "nu0": 0.1, "nu1": 0.1, "lambda": 1.0},
}

LIPSCHITZ_CONVECTION = {
    "b": {"kind": "linear", "params": {"slope": 1.0}},
    "a": {"kind": "linear", "params": {"coef": 1.0}},
    "K": {"kind": "sine", "params": {"c": 0.2}},
    "phi": {"kind": "power", "params": {"exponent": 2.0, "scale": 0.5}},
    "f": {"kind": "sine", "params": {"amplitude": 2.0}},
    "u0": {"kind": "bubble", "params": {"amplitude": 4.0}},
    "constants": {"b0": 0.75, "nu": 2.0, "nu0": 0.25, "nu1": 0.2, "lambda": 1.0},
}

MODELS = {
    "heat-limit": HEAT_LIMIT,
    "p-laplacian": P_LAPLACIAN,
    "lipschitz-convection": LIPSCHITZ_CONVECTION,
}


def model_config(name: str, **overrides) -> dict:
    cfg = copy.deepcopy(MODELS[name])
    cfg.update(copy.deepcopy(overrides))
    return cfg


def shipped_problem(name: str, dim: int = 1, **overrides):
    from .problem import problem_from_config

    return problem_from_config(model_config(name, **overrides), dim)
