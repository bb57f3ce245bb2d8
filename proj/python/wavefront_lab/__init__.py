"""Python interface to the wavefront_lab C++ core.

Symbols, wavefront sets and reports are plain dicts using the same JSON
layouts as the CLI; grid states are ``GridState`` objects whose ``values``
come back as NumPy arrays.
"""

import json as _json

from . import _core
from ._core import (
    GridState,
    WavefrontLabError,
    box_state,
    default_scales,
    gabor_transform,
    gaussian_state,
    hermite_state,
    jump_state,
    l2_distance,
    sha256_hex,
    statphase_problems,
)

__all__ = [
    "GridState",
    "WavefrontLabError",
    "oscillator",
    "validate_symbol",
    "flow",
    "flow_numeric",
    "gamma_scan",
    "recurrence_times",
    "propagate_free",
    "propagate_full",
    "mehler_propagate",
    "exact_propagate",
    "splitstep_propagate",
    "jump_state",
    "gaussian_state",
    "hermite_state",
    "box_state",
    "default_scales",
    "detect_wf",
    "detect_wf_iso",
    "gabor_transform",
    "statphase_problems",
    "verify_boundedness",
    "eval_I",
    "run_scenario",
    "l2_distance",
    "sha256_hex",
]


def _spec(symbol):
    return symbol if isinstance(symbol, str) else _json.dumps(symbol)


def oscillator(omegas, c=None, b=None):
    """Symbol spec for sum_j (xi_j^2 + w_j^2 x_j^2)/2 + c.x + b.xi."""
    omegas = [float(w) for w in omegas]
    spec = {"d": len(omegas), "p2": {"form": "oscillator", "omegas": omegas}}
    if c is not None or b is not None:
        zero = [0.0] * len(omegas)
        spec["p1"] = {"form": "linear", "c": list(c or zero), "b": list(b or zero)}
    return spec


def validate_symbol(symbol, seed=0):
    return _json.loads(_core.validate_symbol(_spec(symbol), seed))


def flow(symbol, t, z0, step=1e-3):
    return _json.loads(_core.flow(_spec(symbol), t, list(z0), step))


def flow_numeric(symbol, t, z0, step=1e-3):
    return _json.loads(_core.flow_numeric(_spec(symbol), t, list(z0), step))


def gamma_scan(symbol, t, samples=64, tol=1e-9, seed=0):
    return _json.loads(_core.gamma_scan(_spec(symbol), t, samples, tol, seed))


def recurrence_times(symbol, t_min, t_max, resolution=1e-2, seed=0):
    return _json.loads(_core.recurrence_times(_spec(symbol), t_min, t_max, resolution, seed))


def propagate_free(wavefront, t, symbol, samples=64, seed=0):
    return _json.loads(_core.propagate_free(_json.dumps(wavefront), t, _spec(symbol), samples, seed))


def propagate_full(wavefront, t, symbol, samples=64, seed=0):
    return _json.loads(_core.propagate_full(_json.dumps(wavefront), t, _spec(symbol), samples, seed))


def mehler_propagate(state, t, symbol):
    return _core.mehler_propagate(state, t, _spec(symbol))


def exact_propagate(state, t, symbol):
    return _core.exact_propagate(state, t, _spec(symbol))


def splitstep_propagate(state, t, symbol, dt=1e-3):
    return _core.splitstep_propagate(state, t, _spec(symbol), dt)


def detect_wf(state, scales=None, threshold=1e-3):
    return _json.loads(_core.detect_wf(state, list(scales or []), threshold))


def detect_wf_iso(state):
    return _json.loads(_core.detect_wf_iso(state))


def verify_boundedness(problem, alpha_max=2, jobs=1):
    return _json.loads(_core.verify_boundedness(problem, alpha_max, jobs))


def eval_I(problem, lam, y):
    return _core.eval_I(problem, lam, list(y))


def run_scenario(config, out_dir="", jobs=1):
    """Run one scenario given as a dict or a path to its JSON file."""
    if not isinstance(config, dict):
        with open(config, encoding="utf-8") as fh:
            config = _json.load(fh)
    return _json.loads(_core.run_scenario(_json.dumps(config), str(out_dir), jobs))
