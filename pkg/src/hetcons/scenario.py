"""Scenario files: JSON schema validation, conversion to :class:`Scenario`,
serialization and the built-in example."""

import json
from dataclasses import replace
from importlib import resources

import jsonschema
import numpy as np

from .ctl_linalg import StateSpace
from .errors import ValidationError
from .graph import Digraph
from .sim import (ProtocolConfig, Scenario, SimConfig, SynthesisConfig, WeightingConfig)
from .synthesis import Agent, ReferenceModel

SCHEMA_VERSION = 1
POINT_MASSES = (2.5, 3.0, 4.0, 1.0, 2.0, 5.0, 7.0, 6.0)
POINT_DRAGS = (0.5, 0.9, 1.9, 0.0, 0.0, 0.0, 1.1, 3.9)
POINT_INTEGRATORS = (4, 5, 6)
OMEGA0 = 3.77
BUILTIN = ("point_masses_8",)


def load_schema():
    text = resources.files("hetcons").joinpath("scenario.schema.json").read_text("utf-8")
    return json.loads(text)


def format_path(parts):
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate_document(doc):
    """Schema errors as ``path: message`` strings (empty when valid)."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errs = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    return [f"{format_path(e.absolute_path)}: {e.message}" for e in errs]


def _matrix(doc, path):
    arr = np.asarray(doc, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{path}: rows have unequal lengths")
    return arr


def _graph(doc, path):
    edges = []
    for k, e in enumerate(doc["edges"]):
        edges.append(tuple(e))
    try:
        return Digraph(int(doc["n"]), tuple(edges))
    except ValidationError as exc:
        raise ValidationError(f"{path}.{exc}") from None


def _agent(k, doc):
    path = f"agents[{k}]"
    A = _matrix(doc["A"], f"{path}.A")
    B = _matrix(doc["B"], f"{path}.B")
    C = _matrix(doc["C"], f"{path}.C")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValidationError(f"{path}.A: must be square, got {A.shape[0]}x{A.shape[1]}")
    if B.shape[0] != n:
        raise ValidationError(f"{path}.B: has {B.shape[0]} rows, expected {n}")
    if C.shape[1] != n:
        raise ValidationError(f"{path}.C: has {C.shape[1]} columns, expected {n}")
    return Agent(k + 1, StateSpace(A, B, C), doc.get("label", ""))


def _reference(doc):
    kind = doc["type"]
    amp = float(doc.get("amplitude", 1.0))
    extra = set(doc) - {"type"}
    if kind == "step":
        if extra - {"amplitude"}:
            raise ValidationError(f"reference: unexpected keys {sorted(extra - {'amplitude'})}")
        return ReferenceModel.step(amp)
    if kind == "ramp":
        if extra - {"amplitude"}:
            raise ValidationError(f"reference: unexpected keys {sorted(extra - {'amplitude'})}")
        return ReferenceModel.ramp(amp)
    if kind == "sinusoid":
        if "omega0" not in doc:
            raise ValidationError("reference.omega0: required for a sinusoid")
        if extra - {"amplitude", "omega0", "phase"}:
            raise ValidationError("reference: A0/C0/x0 only apply to custom references")
        return ReferenceModel.sinusoid(float(doc["omega0"]), amp, float(doc.get("phase", 0.0)))
    for key in ("A0", "C0", "x0"):
        if key not in doc:
            raise ValidationError(f"reference.{key}: required for a custom reference")
    return ReferenceModel(_matrix(doc["A0"], "reference.A0"), _matrix(doc["C0"], "reference.C0"),
                          np.asarray(doc["x0"], dtype=float))


def scenario_from_dict(doc):
    """Validated :class:`Scenario` from a parsed JSON document."""
    errors = validate_document(doc)
    if errors:
        raise ValidationError("scenario schema violations:\n  " + "\n  ".join(errors))
    graph = _graph(doc["graph"], "graph")
    agents = tuple(_agent(k, a) for k, a in enumerate(doc["agents"]))
    ref = _reference(doc["reference"])
    for k, ag in enumerate(agents):
        if ag.plant.p != ref.p:
            raise ValidationError(
                f"agents[{k}].C: output dimension {ag.plant.p} differs from reference {ref.p}")

    sd = doc.get("synthesis", {})
    params = sd.get("params", {})
    wd = sd.get("weighting", {})
    overrides = {}
    for k, o in enumerate(params.get("overrides", [])):
        aid = int(o["agent"])
        if aid > len(agents):
            raise ValidationError(f"synthesis.params.overrides[{k}].agent: no agent {aid}")
        entry = {}
        for key in ("Q", "Qtilde"):
            if key in o:
                entry[key] = _matrix(o[key], f"synthesis.params.overrides[{k}].{key}")
        for key in ("gamma", "q"):
            if key in o:
                entry[key] = float(o[key])
        overrides[aid] = entry
    synth = SynthesisConfig(
        method=sd.get("method", "lqg"), gamma=params.get("gamma"),
        gamma_factor=params.get("gamma_factor"), q=params.get("q"),
        epsilon=params.get("epsilon"), feedforward=sd.get("feedforward", "regulator"),
        weighting=WeightingConfig(wd.get("mode", "auto"), float(wd.get("zero", 1.0)),
                                  wd.get("gain")),
        overrides=overrides)

    pd = doc.get("protocol", {})
    i_R = pd.get("i_R")
    g_root = doc["graph"].get("i_R")
    if i_R is not None and g_root is not None and i_R != g_root:
        raise ValidationError(f"protocol.i_R={i_R} conflicts with graph.i_R={g_root}")
    i_R = i_R if i_R is not None else g_root
    est = _graph(pd["estimator_graph"], "protocol.estimator_graph") \
        if "estimator_graph" in pd else None
    proto = ProtocolConfig(pd.get("mode", "fi"), i_R, est)

    simd = doc.get("sim", {})
    sim = SimConfig(float(simd.get("t_end", SimConfig.t_end)), float(simd.get("h", SimConfig.h)),
                    int(simd.get("decimation", SimConfig.decimation)),
                    float(simd.get("tol", SimConfig.tol)), simd.get("init"))
    if sim.init:
        for key, vals in sim.init.items():
            if len(vals) != len(agents):
                raise ValidationError(f"sim.init.{key}: {len(vals)} entries for {len(agents)} agents")
    return Scenario(graph, agents, ref, synth, proto, sim, doc.get("name", "scenario"))


def parse_scenario(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc})") from None
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from None
    return scenario_from_dict(doc)


def _graph_dict(g):
    return {"n": g.n, "edges": [[i, j, w] for i, j, w in g.edges]}


def scenario_to_dict(s):
    ref = s.reference
    if ref.kind == "step" or ref.kind == "ramp":
        rd = {"type": ref.kind, "amplitude": ref.amplitude}
    elif ref.kind == "sinusoid":
        rd = {"type": "sinusoid", "omega0": ref.omega0, "amplitude": ref.amplitude,
              "phase": ref.phase}
    else:
        rd = {"type": "custom", "A0": ref.A0.tolist(), "C0": ref.C0.tolist(),
              "x0": ref.x0_init.tolist()}
    syn = s.synthesis
    params = {k: v for k, v in (("gamma", syn.gamma), ("gamma_factor", syn.gamma_factor),
                                ("q", syn.q), ("epsilon", syn.epsilon)) if v is not None}
    if syn.overrides:
        params["overrides"] = [
            {"agent": aid, **{k: (v.tolist() if isinstance(v, np.ndarray) else v)
                              for k, v in o.items()}}
            for aid, o in sorted(syn.overrides.items())]
    proto = {"mode": s.protocol.mode}
    if s.protocol.i_R is not None:
        proto["i_R"] = s.protocol.i_R
    if s.protocol.estimator_graph is not None:
        proto["estimator_graph"] = _graph_dict(s.protocol.estimator_graph)
    sim = {"t_end": s.sim.t_end, "h": s.sim.h, "decimation": s.sim.decimation, "tol": s.sim.tol}
    if s.sim.init:
        sim["init"] = {k: [list(map(float, v)) for v in vals] for k, vals in s.sim.init.items()}
    agents = []
    for ag in s.agents:
        a = {"A": ag.plant.A.tolist(), "B": ag.plant.B.tolist(), "C": ag.plant.C.tolist()}
        if ag.label:
            a["label"] = ag.label
        agents.append(a)
    return {"version": SCHEMA_VERSION, "name": s.name, "graph": _graph_dict(s.graph),
            "agents": agents, "reference": rd,
            "synthesis": {"method": syn.method, "feedforward": syn.feedforward, "params": params,
                          "weighting": {"mode": syn.weighting.mode, "zero": syn.weighting.zero,
                                        "gain": syn.weighting.gain}},
            "protocol": proto, "sim": sim}


def point_mass_agents():
    agents = []
    for k, (m, f) in enumerate(zip(POINT_MASSES, POINT_DRAGS)):
        i = k + 1
        if i in POINT_INTEGRATORS:
            plant = StateSpace([[0.0]], [[1.0 / m]], [[1.0]])
            label = f"velocity integrator m={m:g}"
        else:
            plant = StateSpace([[0.0, 1.0], [0.0, -f]], [[0.0], [1.0 / m]], [[1.0, 0.0]])
            label = f"point mass m={m:g} drag={f:g}"
        agents.append(Agent(i, plant, label))
    return tuple(agents)


def builtin_example(name="point_masses_8", ref="sinusoid", mode="fi", method="lqg"):
    """Eight heterogeneous point masses on a directed chain rooted at node 1.

    The weighting gain is set per reference so the slowest loop settles well
    inside the 40 s horizon (``k=100`` for the sinusoid, ``k=5`` for the ramp).
    """
    if name not in BUILTIN:
        raise ValidationError(f"unknown example {name!r}; available: {', '.join(BUILTIN)}")
    if ref == "sinusoid":
        reference, gain = ReferenceModel.sinusoid(OMEGA0), 100.0
    elif ref == "ramp":
        reference, gain = ReferenceModel.ramp(1.0), 5.0
    else:
        raise ValidationError(f"example reference must be 'sinusoid' or 'ramp', got {ref!r}")
    synth = SynthesisConfig(method=method, weighting=WeightingConfig("auto", 1.0, gain))
    return Scenario(Digraph.chain(8), point_mass_agents(), reference, synth,
                    ProtocolConfig(mode, 1, None), SimConfig(), name=f"{name}_{ref}")


def with_graph(s, graph):
    return replace(s, graph=graph)
