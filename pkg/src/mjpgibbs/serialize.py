"""Canonical JSON emission and model/evidence file formats.

All CLI outputs go through :func:`canonical_dumps`, which renders floats
with 17 significant digits and sorts object keys, so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import json
import math

from .ctbn import CtbnInitial, CtbnModel
from .errors import ConfigError
from .lv import LotkaVolterraRates, prey_observation
from .mcmc import CtbnProblem, MjpProblem
from .rates import DenseRateSpec, FiniteInitial, PointMassInitial
from .trajectory import Trajectory


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ConfigError("cannot serialize a non-finite number")
    return format(x, ".17g")


def _canonical(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _canonical(v, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        keys = list(obj)
        if any(not isinstance(k, str) for k in keys):
            raise ConfigError("JSON object keys must be strings")
        for i, k in enumerate(sorted(keys)):
            if i:
                out.append(", ")
            out.append(json.dumps(k, ensure_ascii=False))
            out.append(": ")
            _canonical(obj[k], out)
        out.append("}")
    else:
        try:
            # numpy scalars and similar
            if hasattr(obj, "item"):
                _canonical(obj.item(), out)
                return
        except Exception:
            pass
        raise ConfigError(f"cannot serialize object of type {type(obj)!r}")


def canonical_dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    out: list = []
    _canonical(obj, out)
    out.append("\n")
    return "".join(out)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def encode_state(s):
    return [int(v) for v in s] if isinstance(s, (tuple, list)) else int(s)


def decode_state(s):
    return tuple(int(v) for v in s) if isinstance(s, list) else int(s)


def trajectory_to_jsonable(traj: Trajectory) -> dict:
    return traj.to_jsonable(encode_state)


def trajectory_from_jsonable(obj: dict) -> Trajectory:
    return Trajectory.from_jsonable(obj, decode_state)


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------

def _init_factor_to_jsonable(factor) -> dict:
    if isinstance(factor, PointMassInitial):
        return {"kind": "point", "state": encode_state(factor.state)}
    if isinstance(factor, FiniteInitial):
        return {"kind": "finite", "probs": [float(p) for p in factor.probs]}
    raise ConfigError(f"cannot serialize initial factor {type(factor)!r}")


def _init_factor_from_jsonable(obj):
    if obj["kind"] == "point":
        return PointMassInitial(decode_state(obj["state"]))
    if obj["kind"] == "finite":
        return FiniteInitial(obj["probs"])
    raise ConfigError(f"unknown initial-factor kind {obj['kind']!r}")


def _cfg_key(cfg: tuple) -> str:
    return ",".join(str(c) for c in cfg)


def _cfg_from_key(key: str) -> tuple:
    return () if key == "" else tuple(int(c) for c in key.split(","))


def ctbn_model_to_jsonable(model: CtbnModel, t_max: float) -> dict:
    return {
        "kind": "ctbn",
        "t_max": float(t_max),
        "nodes": list(model.nodes),
        "edges": [list(e) for e in model.edges],
        "state_spaces": {str(w): int(model.state_spaces[w])
                         for w in model.nodes},
        "cims": {str(w): {_cfg_key(cfg): [[float(v) for v in row]
                                          for row in spec.matrix]
                          for cfg, spec in model.cims[w].items()}
                 for w in model.nodes},
        "init": [_init_factor_to_jsonable(f) for f in model.init.factors],
    }


def lv_model_to_jsonable(q: LotkaVolterraRates, init, t_max: float) -> dict:
    if not isinstance(init, PointMassInitial):
        raise ConfigError("the predator-prey model needs a known start")
    return {
        "kind": "lotka_volterra",
        "t_max": float(t_max),
        "alpha": q.alpha, "beta": q.beta, "delta": q.delta, "gamma": q.gamma,
        "init": encode_state(init.state),
    }


def model_from_jsonable(obj: dict):
    """Returns (kind, payload): ("ctbn", (model, t_max)) or
    ("lotka_volterra", (q, init, t_max))."""
    kind = obj.get("kind")
    if kind == "ctbn":
        nodes = tuple(obj["nodes"])
        model = CtbnModel(
            nodes=nodes,
            edges=tuple(tuple(e) for e in obj["edges"]),
            state_spaces={w: int(obj["state_spaces"][str(w)])
                          for w in nodes},
            cims={w: {_cfg_from_key(key): DenseRateSpec(rows)
                      for key, rows in obj["cims"][str(w)].items()}
                  for w in nodes},
            init=CtbnInitial([_init_factor_from_jsonable(f)
                              for f in obj["init"]]),
        )
        return "ctbn", (model, float(obj["t_max"]))
    if kind == "lotka_volterra":
        q = LotkaVolterraRates(obj["alpha"], obj["beta"], obj["delta"],
                               obj["gamma"])
        init = PointMassInitial(decode_state(obj["init"]))
        return "lotka_volterra", (q, init, float(obj["t_max"]))
    raise ConfigError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# Evidence files
# ---------------------------------------------------------------------------

def ctbn_evidence_to_jsonable(problem: CtbnProblem) -> list:
    out = []
    for w in problem.model.nodes:
        for ob in problem.evidence.get(w, ()):
            state = getattr(ob, "point_state", None)
            if state is None:
                raise ConfigError(
                    "only exact point observations serialize for networks")
            out.append({"node": w, "kind": "point", "t": float(ob.t),
                        "point_state": encode_state(state)})
        if w in problem.observed:
            out.append({"node": w, "kind": "child_process",
                        "trajectory": trajectory_to_jsonable(
                            problem.observed[w])})
    return out


def lv_evidence_to_jsonable(problem: MjpProblem) -> list:
    out = []
    for ob in problem.evidence:
        value = getattr(ob, "value", None)
        if value is None:
            raise ConfigError("expected named-rule observations")
        out.append({"kind": "point", "t": float(ob.t),
                    "loglik": {"rule": "rao_teh_lv", "observed": int(value)}})
    return out


def problem_from_jsonables(model_obj: dict, evidence_obj: list):
    """Rebuild an inference problem from model + evidence file contents."""
    from .presets import pin_state

    kind, payload = model_from_jsonable(model_obj)
    if kind == "ctbn":
        model, t_max = payload
        evidence: dict = {}
        observed: dict = {}
        for entry in evidence_obj:
            w = entry["node"]
            w = w if w in model.nodes else int(w)
            if w not in model.nodes:
                raise ConfigError(f"evidence references unknown node {w!r}")
            if entry["kind"] == "point":
                evidence.setdefault(w, []).append(
                    pin_state(entry["t"], decode_state(entry["point_state"])))
            elif entry["kind"] == "child_process":
                observed[w] = trajectory_from_jsonable(entry["trajectory"])
            else:
                raise ConfigError(f"unknown evidence kind {entry['kind']!r}")
        evidence = {w: tuple(v) for w, v in evidence.items()}
        return CtbnProblem(model=model, t_max=t_max, evidence=evidence,
                           observed=observed)
    q, init, t_max = payload
    evs = []
    for entry in evidence_obj:
        rule = entry.get("loglik", {}).get("rule")
        if entry["kind"] != "point" or rule != "rao_teh_lv":
            raise ConfigError("predator-prey evidence must use the "
                              "named rule 'rao_teh_lv'")
        evs.append(prey_observation(entry["t"], entry["loglik"]["observed"]))
    return MjpProblem(q=q, init=init, t_max=t_max, evidence=tuple(evs))
