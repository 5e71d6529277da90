"""Reference signals, fixed-step integration, consensus metrics and the
end-to-end scenario pipeline."""

import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .errors import DivergenceError, HetconsError, NumericalError, ValidationError
from .graph import (Digraph, build_matrices, default_root, find_dominance_scaling,
                    reachable_nodes)
from .numeric import DEFAULT_POLICY
from .protocol import (assemble_collective, closed_loop, normalize_mode, verify_stability)
from .synthesis import (METHODS, GainSet, ReferenceModel, augment_with_weighting,
                        check_assumption_a, epsilon_scaled_gains, pi_from_gains,
                        propose_weighting, sinusoid_feedforward_for, solve_regulator_eqs,
                        synth_gains, with_feedforward)

STAGES = ("graph", "scaling", "weighting", "assumption_a", "synthesis", "feedforward",
          "assembly", "stability", "simulation", "metrics")


# --- configuration ---------------------------------------------------------------

@dataclass(frozen=True)
class WeightingConfig:
    """``mode`` is ``auto`` (weight agents with an internal-model deficit) or ``none``."""

    mode: str = "auto"
    zero: float = 1.0
    gain: float | None = None


@dataclass(frozen=True)
class SynthesisConfig:
    method: str = "lqg"
    gamma: float | None = None
    gamma_factor: float | None = None
    q: float | None = None
    epsilon: float | str | None = None
    feedforward: str = "regulator"
    weighting: WeightingConfig = WeightingConfig()
    overrides: dict = field(default_factory=dict)  # agent id -> {"Q": ..., "Qtilde": ...}


@dataclass(frozen=True)
class ProtocolConfig:
    mode: str = "fi"
    i_R: int | None = None
    estimator_graph: Digraph | None = None


@dataclass(frozen=True)
class SimConfig:
    t_end: float = DEFAULT_POLICY.t_end
    h: float = DEFAULT_POLICY.h
    decimation: int = DEFAULT_POLICY.decimation
    tol: float = DEFAULT_POLICY.consensus_tol
    init: dict | None = None  # optional "x" and "x_hat" per-agent lists


@dataclass(frozen=True)
class Scenario:
    graph: Digraph
    agents: tuple
    reference: ReferenceModel
    synthesis: SynthesisConfig = SynthesisConfig()
    protocol: ProtocolConfig = ProtocolConfig()
    sim: SimConfig = SimConfig()
    name: str = "scenario"

    def __post_init__(self):
        if len(self.agents) != self.graph.n:
            raise ValidationError(
                f"graph has {self.graph.n} nodes but {len(self.agents)} agents were given")
        if self.sim.h <= 0 or self.sim.t_end <= 0:
            raise ValidationError("sim.h and sim.t_end must be positive")
        if self.sim.decimation < 1:
            raise ValidationError("sim.decimation must be at least 1")
        if self.synthesis.method not in METHODS:
            raise ValidationError(f"unknown synthesis method {self.synthesis.method!r}")
        normalize_mode(self.protocol.mode)
        if self.synthesis.feedforward not in ("regulator", "sinusoid"):
            raise ValidationError("synthesis.feedforward must be 'regulator' or 'sinusoid'")
        i_R = self.protocol.i_R
        if i_R is not None and not 1 <= i_R <= self.graph.n:
            raise ValidationError(f"protocol.i_R={i_R} out of range 1..{self.graph.n}")

    def with_mode(self, mode):
        return replace(self, protocol=replace(self.protocol, mode=mode))


# --- reference and integration -------------------------------------------------------

def reference_output(ref, t):
    """``(x0(t), y0(t))``; ``t`` may be a scalar or an array (leading axis)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("reference time must be nonnegative")
    ts = np.atleast_1d(t)
    x = ref.x0_init
    if ref.kind == "step":
        X = np.repeat(x[None, :], ts.size, axis=0)
    elif ref.kind == "ramp":
        X = np.stack([x[0] + ts * x[1], np.full_like(ts, x[1])], axis=1)
    elif ref.kind == "sinusoid":
        c, s = np.cos(ref.omega0 * ts), np.sin(ref.omega0 * ts)
        X = np.stack([c * x[0] + s * x[1], -s * x[0] + c * x[1]], axis=1)
    else:
        X = np.stack([expm(ref.A0 * tk) @ x for tk in ts])
    Y = X @ ref.C0.T
    if t.ndim == 0:
        return X[0], Y[0]
    return X, Y


def rk4_propagator(A, h):
    """One classical RK4 step for ``z' = A z`` written as a matrix."""
    A = np.asarray(A, dtype=float)
    I = np.eye(A.shape[0])
    hA = h * A
    return I + hA @ (I + hA / 2 @ (I + hA / 3 @ (I + hA / 4)))


def propagate(A, z0, t_end, h=DEFAULT_POLICY.h, decimation=1):
    """RK4 integration of ``z' = A z``; returns ``(times, states)`` at every
    ``decimation``-th step. Raises :class:`DivergenceError` on blow-up."""
    if h <= 0 or t_end <= 0:
        raise ValidationError("h and t_end must be positive")
    if h > 1e-2:
        raise ValidationError(f"step h={h:g} exceeds 1e-2")
    nsteps = int(round(t_end / h))
    if abs(nsteps * h - t_end) > 1e-9 * max(1.0, t_end):
        raise ValidationError(f"t_end={t_end:g} is not a multiple of h={h:g}")
    decimation = int(decimation)
    if nsteps % decimation:
        raise ValidationError("number of steps is not a multiple of the decimation")
    z = np.asarray(z0, dtype=float).copy()
    if z.shape != (A.shape[0],):
        raise ValidationError(f"initial state has length {z.size}, expected {A.shape[0]}")
    P = np.linalg.matrix_power(rk4_propagator(A, h), decimation)
    nrec = nsteps // decimation
    out = np.empty((nrec + 1, z.size))
    out[0] = z
    for k in range(1, nrec + 1):
        z = P @ z
        if not np.all(np.isfinite(z)) or np.max(np.abs(z), initial=0.0) > 1e150:
            raise DivergenceError(f"state diverged near t={k * decimation * h:g}",
                                  time=k * decimation * h, stage="simulation")
        out[k] = z
    times = np.arange(nrec + 1) * (decimation * h)
    return times, out


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    y: np.ndarray       # (samples, N, p)
    y0: np.ndarray      # (samples, p)
    states: np.ndarray | None = None

    @property
    def N(self):
        return self.y.shape[1]

    @property
    def p(self):
        return self.y.shape[2]

    def table(self):
        """Rows ``t, y0_1..y0_p, y_1_1..y_N_p``."""
        k = self.times.size
        return np.hstack([self.times[:, None], self.y0, self.y.reshape(k, -1)])

    def header(self):
        cols = ["t"] + [f"y0_{c + 1}" for c in range(self.p)]
        cols += [f"y_{i + 1}_{c + 1}" for i in range(self.N) for c in range(self.p)]
        return cols


def initial_state(cl, ref, init=None):
    """Default initial state: agents and estimates at zero, ``x0`` canonical.

    ``init`` may give ``x`` (stacked agent state) and ``x_hat`` (stacked
    estimate, of the state or of the regulation error depending on mode).
    """
    z = np.zeros(cl.n_sim)
    z[cl.segment("x0")] = ref.x0_init
    init = init or {}
    sx = cl.segment("x")
    if init.get("x") is not None:
        x = np.concatenate([np.asarray(v, dtype=float).reshape(-1) for v in init["x"]])
        if x.size != sx.stop - sx.start:
            raise ValidationError(f"init.x has {x.size} entries, expected {sx.stop - sx.start}")
        z[sx] = x
    if init.get("x_hat") is not None:
        xh = np.concatenate([np.asarray(v, dtype=float).reshape(-1) for v in init["x_hat"]])
        if cl.mode == "fi":
            raise ValidationError("init.x_hat given but FI mode has no estimator")
        if xh.size != sx.stop - sx.start:
            raise ValidationError(f"init.x_hat has {xh.size} entries")
        if cl.mode == "observer":
            z[cl.segment("e_x")] = z[sx] - xh
        else:
            z[cl.segment("x_hat_tilde")] = xh
    elif cl.mode == "observer":
        z[cl.segment("e_x")] = z[sx]
    return z


def integrate(cl, ref, init=None, t_end=DEFAULT_POLICY.t_end, h=DEFAULT_POLICY.h,
              decimation=DEFAULT_POLICY.decimation, keep_states=True):
    """Simulate a closed loop driven by the reference model."""
    z0 = initial_state(cl, ref, init) if not isinstance(init, np.ndarray) else init
    times, Z = propagate(cl.A_sim, z0, t_end, h, decimation)
    y = (Z @ cl.C_sim.T).reshape(times.size, cl.N, cl.p)
    y0 = Z @ cl.C0_sim.T
    return Trajectory(times, y, y0, Z if keep_states else None)


# --- metrics --------------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    settle_time: float
    final_error: float
    pairwise_final: float
    tol: float
    t_end: float

    @property
    def settled(self):
        return self.settle_time < self.t_end

    def as_dict(self):
        return {"settle_time": None if np.isinf(self.settle_time) else self.settle_time,
                "settled": self.settled, "final_error": self.final_error,
                "pairwise_final": self.pairwise_final, "tol": self.tol}


def tracking_error(traj):
    """``max_i ||y_i(t) - y0(t)||_inf`` per sample."""
    return np.max(np.abs(traj.y - traj.y0[:, None, :]), axis=(1, 2))


def consensus_metrics(traj, tol=DEFAULT_POLICY.consensus_tol):
    if traj.times.size == 0:
        raise ValidationError("empty trajectory")
    err = tracking_error(traj)
    bad = np.flatnonzero(err > tol)
    if bad.size == 0:
        settle = float(traj.times[0])
    elif bad[-1] + 1 < traj.times.size:
        settle = float(traj.times[bad[-1] + 1])
    else:
        settle = float("inf")
    yf = traj.y[-1]
    pair = float(np.max(np.abs(yf[:, None, :] - yf[None, :, :]))) if traj.N > 1 else 0.0
    return Metrics(settle, float(err[-1]), pair, float(tol), float(traj.times[-1]))


# --- pipeline -------------------------------------------------------------------------

@contextmanager
def _stage(name, timings):
    t0 = time.perf_counter()
    try:
        yield
    except HetconsError as exc:
        if exc.stage is None:
            exc.stage = name
        raise
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc), stage=name) from exc
    finally:
        timings[name] = time.perf_counter() - t0


@dataclass
class RunReport:
    scenario: Scenario
    mode: str
    i_R: int
    scaling: object = None
    agents: tuple = ()
    weightings: dict = field(default_factory=dict)
    assumption: tuple = ()
    gains: GainSet | None = None
    epsilon: float | None = None
    collective: object = None
    closed_loop: object = None
    stability: object = None
    trajectory: Trajectory | None = None
    metrics: Metrics | None = None
    stage_timings: dict = field(default_factory=dict)

    def summary(self):
        out = {"scenario": self.scenario.name, "mode": self.mode, "i_R": self.i_R,
               "method": self.scenario.synthesis.method, "epsilon": self.epsilon,
               "stage_timings": dict(self.stage_timings),
               "numeric_defaults": DEFAULT_POLICY.as_dict()}
        if self.scaling is not None:
            out["scaling"] = {"d": self.scaling.d.tolist(), "lambda_min": self.scaling.lambda_min,
                              "margin": self.scaling.margin}
        out["weighting"] = {str(k): w.as_dict() for k, w in self.weightings.items()}
        out["assumption_a"] = [r.as_dict() for r in self.assumption]
        if self.stability is not None:
            out["stability"] = self.stability.as_dict()
        if self.metrics is not None:
            out.update(self.metrics.as_dict())
        return out


def resolve_root(g, i_R=None):
    if i_R is not None:
        if i_R not in reachable_nodes(g):
            raise ValidationError(f"i_R={i_R} is not a reachable node")
        return int(i_R)
    root = default_root(g)
    if root is None:
        raise ValidationError("graph not connected: no node is reachable from every other node")
    return root


def design(s, policy=DEFAULT_POLICY, report=None):
    """Run every stage up to and including stability verification."""
    rep = report or RunReport(scenario=s, mode=normalize_mode(s.protocol.mode), i_R=0)
    tm = rep.stage_timings
    cfg = s.synthesis

    with _stage("graph", tm):
        rep.i_R = resolve_root(s.graph, s.protocol.i_R)
        gm = build_matrices(s.graph)
        est_g = s.protocol.estimator_graph
        if est_g is not None:
            if est_g.n != s.graph.n:
                raise ValidationError("estimator graph has a different node count")
            if rep.i_R not in reachable_nodes(est_g):
                raise ValidationError(f"estimator graph: i_R={rep.i_R} is not reachable")
            egm = build_matrices(est_g)
        for k, ag in enumerate(s.agents):
            ag.check_realization(policy)

    with _stage("scaling", tm):
        sc = find_dominance_scaling(gm.laplacian, rep.i_R, policy=policy)
        rep.scaling = sc
        est_sc = (find_dominance_scaling(egm.laplacian, rep.i_R, policy=policy)
                  if est_g is not None else sc)

    with _stage("weighting", tm):
        agents = []
        for ag in s.agents:
            w = None
            if cfg.weighting.mode == "auto":
                w = propose_weighting(ag, s.reference, cfg.weighting.zero, cfg.weighting.gain,
                                      policy)
            if w is not None:
                rep.weightings[ag.id] = w
                ag = augment_with_weighting(ag, w)
            agents.append(ag)
        rep.agents = tuple(agents)

    with _stage("assumption_a", tm):
        reports = tuple(check_assumption_a(ag, s.reference, policy) for ag in agents)
        rep.assumption = reports
        failed = [r for r in reports if not r.passed]
        if failed:
            r = failed[0]
            why = ("fewer inputs than outputs" if not r.input_dim_ok else
                   ", ".join(f"s={c.eigenvalue:.4g}: deficit {c.deficit}, zero={not c.not_a_zero}"
                             for c in r.checks if not c.passed))
            raise ValidationError(f"agent {r.agent_id} fails the internal-model condition: {why}")

    with _stage("synthesis", tm):
        gl = []
        for ag in agents:
            ov = cfg.overrides.get(ag.id, {})
            gl.append(synth_gains(ag, cfg.method, Q=ov.get("Q"), Qtilde=ov.get("Qtilde"),
                                  gamma=ov.get("gamma", cfg.gamma),
                                  gamma_factor=cfg.gamma_factor, q=ov.get("q", cfg.q),
                                  policy=policy))
        d, est_d = sc.d, est_sc.d
        if cfg.epsilon is not None:
            eps = None if cfg.epsilon == "auto" else float(cfg.epsilon)
            Fe = epsilon_scaled_gains([g.F for g in gl], sc.d_max, eps)
            Le = epsilon_scaled_gains([g.L.T for g in gl], est_sc.d_max, eps)
            rep.epsilon = 1.0 / sc.d_max if eps is None else eps
            gl = [replace(g, F=f, L=l.T) for g, f, l in zip(gl, Fe, Le)]
            d = np.ones(s.graph.n)
            est_d = np.ones(s.graph.n)

    with _stage("feedforward", tm):
        out = []
        for ag, g in zip(agents, gl):
            if cfg.feedforward == "sinusoid":
                F0 = sinusoid_feedforward_for(ag, g.F, s.reference, policy)
                Pi = pi_from_gains(ag.plant.C, g.F, s.reference.C0, F0, ag.plant.A,
                                   s.reference.A0)
            else:
                Pi, F0 = solve_regulator_eqs(ag, g.F, s.reference, policy)
            out.append(with_feedforward(g, Pi, F0))
        rep.gains = GainSet(tuple(out), cfg.method)

    with _stage("assembly", tm):
        cs = assemble_collective(agents, rep.gains, gm.adjacency, d, rep.i_R,
                                 est_adjacency=egm.adjacency if est_g is not None else None,
                                 est_d=est_d, ref=s.reference)
        rep.collective = cs
        rep.closed_loop = closed_loop(cs, rep.mode)

    with _stage("stability", tm):
        st = verify_stability(cs, policy=policy)
        rep.stability = st
        if not st.passed:
            raise NumericalError(f"closed loop not stable: {st.as_dict()}")
    return rep


def run_scenario(s, policy=DEFAULT_POLICY, simulate=True):
    """Full pipeline; errors carry the tag of the stage that raised them."""
    rep = design(s, policy)
    if not simulate:
        return rep
    tm = rep.stage_timings
    with _stage("simulation", tm):
        rep.trajectory = integrate(rep.closed_loop, s.reference, _init_for(rep, s),
                                   s.sim.t_end, s.sim.h, s.sim.decimation)
    with _stage("metrics", tm):
        rep.metrics = consensus_metrics(rep.trajectory, s.sim.tol)
    return rep


def _init_for(rep, s):
    """Map per-agent init entries given for the original plants onto the
    (possibly weighted) agent states, padding filter states with zeros."""
    init = s.sim.init
    if not init:
        return None
    out = {}
    for key in ("x", "x_hat"):
        if init.get(key) is None:
            continue
        vals = []
        for ag, v in zip(rep.agents, init[key]):
            v = np.asarray(v, dtype=float).reshape(-1)
            if v.size == ag.plant_states and v.size != ag.plant.n:
                v = np.concatenate([v, np.zeros(ag.plant.n - v.size)])
            vals.append(v)
        out[key] = vals
    return out
