"""Collective closed loops and their distributed (per-agent) counterparts.

Three protocols are supported:

``fi``
    full-information state feedback ``u = M (F0 x0_bar - F x)``.
``observer``
    the same law on local estimates ``x_hat`` from a neighbourhood observer.
``consensus-observer``
    a distributed estimate of the regulation error ``x - Pi x0_bar`` driven
    by relative outputs plus one absolute error at the controlled agent, with
    ``u = -M F x_hat``.

``M`` is the block-expanded interconnection ``D (L + e_iR e_iR')``; the
control side expands with each agent's input size, the estimator side with
the common output size.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import linear_sum_assignment

from .errors import NumericalError, ValidationError
from .graph import expand_blocks, pinned_laplacian
from .numeric import DEFAULT_POLICY

MODES = ("fi", "observer", "consensus-observer")
_MODE_ALIASES = {"fi": "fi", "full-information": "fi", "observer": "observer",
                 "observer-based": "observer", "consensus-observer": "consensus-observer",
                 "consensus_observer": "consensus-observer", "co": "consensus-observer"}


def normalize_mode(mode):
    try:
        return _MODE_ALIASES[str(mode).lower()]
    except KeyError:
        raise ValidationError(f"unknown protocol mode {mode!r}; expected one of {MODES}") from None


@dataclass(frozen=True)
class Coupling:
    """Scalar interconnection data for one side (control or estimator)."""

    adjacency: np.ndarray
    d: np.ndarray
    i_R: int

    @property
    def matrix(self):
        lap = np.diag(self.adjacency.sum(axis=1)) - self.adjacency
        return self.d[:, None] * pinned_laplacian(lap, self.i_R)

    def apply_local(self, i, own, neighbor_values):
        """Row ``i`` of ``M v`` from ``v_i`` and the neighbours' ``v_j`` only."""
        k = i - 1
        acc = own * (1.0 if i == self.i_R else 0.0)
        for j, vj in neighbor_values.items():
            acc = acc + self.adjacency[k, j - 1] * (own - vj)
        return self.d[k] * acc

    def neighbors(self, i):
        row = self.adjacency[i - 1]
        return tuple(int(j) + 1 for j in np.flatnonzero(row > 0))


def _offsets(dims):
    return np.concatenate([[0], np.cumsum(dims)]).astype(int)


@dataclass(frozen=True)
class CollectiveSystem:
    n: tuple
    m: tuple
    p: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray
    L: np.ndarray
    M: np.ndarray
    M_est: np.ndarray
    control: Coupling
    estimator: Coupling
    i_R: int
    Pi: np.ndarray | None = None
    F0: np.ndarray | None = None
    A0: np.ndarray | None = None
    C0: np.ndarray | None = None
    agent_ids: tuple = field(default=())

    @property
    def N(self):
        return len(self.n)

    @property
    def n0(self):
        return None if self.A0 is None else self.A0.shape[0]

    def split(self, vec, dims):
        off = _offsets(dims)
        return [np.asarray(vec)[off[k]:off[k + 1]] for k in range(len(dims))]

    def stack_x0(self):
        """``1_N (x) I_n0``, mapping ``x0`` to ``x0_bar``."""
        return np.kron(np.ones((self.N, 1)), np.eye(self.n0))

    def C0_bar(self):
        return np.kron(np.eye(self.N), self.C0)


def assemble_collective(agents, gains, adjacency, d, i_R, est_adjacency=None, est_d=None,
                        ref=None):
    """Stack agents and gains into block-diagonal collective matrices.

    ``d`` holds the diagonal scaling (all ones for the unscaled coupling);
    ``est_adjacency`` / ``est_d`` optionally define a separate estimator graph.
    """
    agents, gains = list(agents), list(gains)
    N = len(agents)
    if N == 0:
        raise ValidationError("no agents")
    if len(gains) != N:
        raise ValidationError(f"{len(gains)} gain sets for {N} agents")
    adjacency = np.asarray(adjacency, dtype=float)
    d = np.asarray(d, dtype=float).reshape(-1)
    if adjacency.shape != (N, N) or d.shape != (N,):
        raise ValidationError(f"interconnection data does not match {N} agents")
    est_adjacency = adjacency if est_adjacency is None else np.asarray(est_adjacency, float)
    est_d = d if est_d is None else np.asarray(est_d, dtype=float).reshape(-1)
    if est_adjacency.shape != (N, N) or est_d.shape != (N,):
        raise ValidationError(f"estimator interconnection does not match {N} agents")

    p = agents[0].plant.p
    for k, (ag, g) in enumerate(zip(agents, gains)):
        pl = ag.plant
        if pl.p != p:
            raise ValidationError(f"agents[{k}]: output dimension {pl.p}, expected {p}")
        if g.F.shape != (pl.m, pl.n):
            raise ValidationError(f"agents[{k}]: F has shape {g.F.shape}, expected {(pl.m, pl.n)}")
        if g.L.shape != (pl.n, p):
            raise ValidationError(f"agents[{k}]: L has shape {g.L.shape}, expected {(pl.n, p)}")
        if ref is not None and g.F0 is not None and g.F0.shape != (pl.m, ref.n0):
            raise ValidationError(f"agents[{k}]: F0 has shape {g.F0.shape}")
    n = tuple(ag.plant.n for ag in agents)
    m = tuple(ag.plant.m for ag in agents)
    control = Coupling(adjacency, d, int(i_R))
    estimator = Coupling(est_adjacency, est_d, int(i_R))
    M = expand_blocks(control.matrix, m)
    M_est = expand_blocks(estimator.matrix, [p] * N)
    Pi = F0 = A0 = C0 = None
    if ref is not None:
        A0, C0 = ref.A0, ref.C0
        if all(g.Pi is not None for g in gains):
            Pi = block_diag(*[g.Pi for g in gains])
        if all(g.F0 is not None for g in gains):
            F0 = block_diag(*[g.F0 for g in gains])
    return CollectiveSystem(
        n=n, m=m, p=p,
        A=block_diag(*[ag.plant.A for ag in agents]),
        B=block_diag(*[ag.plant.B for ag in agents]),
        C=block_diag(*[ag.plant.C for ag in agents]),
        F=block_diag(*[g.F for g in gains]),
        L=block_diag(*[g.L for g in gains]),
        M=M, M_est=M_est, control=control, estimator=estimator, i_R=int(i_R),
        Pi=Pi, F0=F0, A0=A0, C0=C0, agent_ids=tuple(ag.id for ag in agents))


# --- closed loops ---------------------------------------------------------------

@dataclass(frozen=True)
class ClosedLoop:
    """Closed loop in analysis coordinates plus an autonomous simulation form.

    ``A_cl``/``B_cl``/``C_cl`` follow the protocol's own coordinates
    (``state_layout``). ``A_sim`` acts on ``(agent states, estimator states,
    x0)`` as listed in ``sim_layout``; ``C_sim`` maps it to the stacked agent
    outputs and ``C0_sim`` to the reference output.
    """

    mode: str
    A_cl: np.ndarray
    B_cl: np.ndarray | None
    C_cl: np.ndarray
    state_layout: tuple
    A_sim: np.ndarray
    C_sim: np.ndarray
    C0_sim: np.ndarray
    sim_layout: tuple
    N: int
    p: int

    def segment(self, name, sim=True):
        layout = self.sim_layout if sim else self.state_layout
        for nm, a, b in layout:
            if nm == name:
                return slice(a, b)
        raise KeyError(name)

    @property
    def n_sim(self):
        return self.A_sim.shape[0]


def _layout(*pairs):
    out, k = [], 0
    for name, size in pairs:
        out.append((name, k, k + size))
        k += size
    return tuple(out)


def closed_loop(cs, mode):
    mode = normalize_mode(mode)
    A, B, C, F, L, M, Me = cs.A, cs.B, cs.C, cs.F, cs.L, cs.M, cs.M_est
    nx = A.shape[0]
    AF = A - B @ M @ F
    AL = A - L @ Me @ C
    Z = np.zeros((nx, nx))
    if cs.A0 is None:
        raise ValidationError("closed loop needs a reference model")
    n0 = cs.n0
    one = cs.stack_x0()

    if mode == "fi":
        if cs.F0 is None:
            raise ValidationError("FI mode needs feedforward gains F0")
        A_cl, B_cl = AF, B @ M
        layout = _layout(("x", nx))
        A_sim = np.block([[AF, B @ M @ cs.F0 @ one], [np.zeros((n0, nx)), cs.A0]])
        sim_layout = _layout(("x", nx), ("x0", n0))
        C_sim = np.hstack([C, np.zeros((C.shape[0], n0))])
    elif mode == "observer":
        if cs.F0 is None:
            raise ValidationError("observer mode needs feedforward gains F0")
        A_cl = np.block([[AF, B @ M @ F], [Z, AL]])
        B_cl = np.vstack([B @ M, np.zeros_like(B @ M)])
        layout = _layout(("x", nx), ("e_x", nx))
        r = B @ M @ cs.F0 @ one
        A_sim = np.block([[AF, B @ M @ F, r],
                          [Z, AL, np.zeros((nx, n0))],
                          [np.zeros((n0, 2 * nx)), cs.A0]])
        sim_layout = _layout(("x", nx), ("e_x", nx), ("x0", n0))
        C_sim = np.hstack([C, np.zeros((C.shape[0], nx + n0))])
    else:
        if cs.Pi is None:
            raise ValidationError("consensus-observer mode needs regulator solutions Pi")
        A_cl = np.block([[AF, B @ M @ F], [Z, AL]])
        B_cl = None
        layout = _layout(("x_tilde", nx), ("e_x_tilde", nx))
        LMC = L @ Me @ C
        A_sim = np.block([[A, -B @ M @ F, np.zeros((nx, n0))],
                          [LMC, A - B @ M @ F - LMC, -L @ Me @ cs.C0_bar() @ one],
                          [np.zeros((n0, 2 * nx)), cs.A0]])
        sim_layout = _layout(("x", nx), ("x_hat_tilde", nx), ("x0", n0))
        C_sim = np.hstack([C, np.zeros((C.shape[0], nx + n0))])
    C_cl = np.hstack([C, np.zeros((C.shape[0], A_cl.shape[0] - nx))])
    C0_sim = np.hstack([np.zeros((cs.p, A_sim.shape[0] - n0)), cs.C0])
    for arr in (A_cl, A_sim, C_sim, C0_sim):
        arr.setflags(write=False)
    return ClosedLoop(mode, A_cl, B_cl, C_cl, layout, A_sim, C_sim, C0_sim, sim_layout,
                      cs.N, cs.p)


def consensus_coordinates(cs, cl, z):
    """Map augmented states ``(x, x_hat_tilde, x0)`` (rows of ``z``) to the
    error coordinates ``(x_tilde, e_x_tilde)`` with ``x_tilde = x - Pi x0_bar``."""
    z = np.atleast_2d(z)
    x = z[:, cl.segment("x")]
    xh = z[:, cl.segment("x_hat_tilde")]
    x0 = z[:, cl.segment("x0")]
    xt = x - x0 @ (cs.Pi @ cs.stack_x0()).T
    return np.hstack([xt, xt - xh])


# --- distributed evaluation --------------------------------------------------------

def local_control(cs, i, v_i, v_neighbors):
    """``u_i = d_i [delta(i - i_R) v_i + sum_j a_ij (v_i - v_j)]``."""
    return cs.control.apply_local(i, np.asarray(v_i, dtype=float), v_neighbors)


def local_observer_rhs(cs, agent_plant, gains_L, i, xhat_i, u_i, ytil_i, ytil_neighbors):
    """Neighbourhood observer for agent ``i`` driven by output residuals
    ``y_j - C_j x_hat_j`` of itself and its estimator-graph neighbours."""
    corr = cs.estimator.apply_local(i, np.asarray(ytil_i, dtype=float), ytil_neighbors)
    return agent_plant.A @ xhat_i + agent_plant.B @ u_i + gains_L @ corr


def local_consensus_observer_rhs(cs, agent_plant, gains_L, i, xhat_i, u_i, eps, e_yR,
                                 yhat_i, yhat_neighbors):
    """Distributed estimator of the regulation error for agent ``i``.

    ``eps`` maps each estimator neighbour ``j`` to the relative output
    ``y_i - y_j``; ``e_yR`` is the absolute tracking error, used only when
    ``i`` is the controlled agent; ``yhat`` are estimated error outputs
    ``C_j x_hat_j``.
    """
    k = i - 1
    est = cs.estimator
    yhat_i = np.asarray(yhat_i, dtype=float)
    acc = np.zeros_like(yhat_i)
    if i == est.i_R:
        acc = acc + (np.asarray(e_yR, dtype=float) - yhat_i)
    for j, yj in yhat_neighbors.items():
        acc = acc + est.adjacency[k, j - 1] * (np.asarray(eps[j]) - (yhat_i - yj))
    corr = est.d[k] * acc
    return agent_plant.A @ xhat_i + agent_plant.B @ u_i + gains_L @ corr


def distributed_protocol_eval(cs, i, signals, mode, agents, gains):
    """Agent ``i``'s control (and observer right-hand side) from local data.

    ``signals`` holds full per-agent lists (``x``, ``x_hat``, ``x0``) as a
    stand-in for the network; this function forwards to the local rules only
    the entries of agent ``i`` and its graph neighbours.
    """
    mode = normalize_mode(mode)
    k = i - 1
    ag, g = agents[k], gains[k]
    x0 = np.asarray(signals["x0"], dtype=float)
    x = [np.asarray(v, dtype=float) for v in signals["x"]]
    nb_u = cs.control.neighbors(i)
    nb_y = cs.estimator.neighbors(i)
    if mode == "fi":
        def v(j):
            return gains[j - 1].F0 @ x0 - gains[j - 1].F @ x[j - 1]
        return {"u": local_control(cs, i, v(i), {j: v(j) for j in nb_u})}
    xh = [np.asarray(v, dtype=float) for v in signals["x_hat"]]
    if mode == "observer":
        def v(j):
            return gains[j - 1].F0 @ x0 - gains[j - 1].F @ xh[j - 1]

        def yt(j):
            return agents[j - 1].plant.C @ (x[j - 1] - xh[j - 1])
        u = local_control(cs, i, v(i), {j: v(j) for j in nb_u})
        rhs = local_observer_rhs(cs, ag.plant, g.L, i, xh[k], u, yt(i), {j: yt(j) for j in nb_y})
        return {"u": u, "x_hat_dot": rhs}

    def v(j):
        return -gains[j - 1].F @ xh[j - 1]

    def y(j):
        return agents[j - 1].plant.C @ x[j - 1]

    def yh(j):
        return agents[j - 1].plant.C @ xh[j - 1]
    u = local_control(cs, i, v(i), {j: v(j) for j in nb_u})
    eps = {j: y(i) - y(j) for j in nb_y}
    e_yR = y(i) - cs.C0 @ x0 if i == cs.estimator.i_R else None
    rhs = local_consensus_observer_rhs(cs, ag.plant, g.L, i, xh[k], u, eps, e_yR, yh(i),
                                       {j: yh(j) for j in nb_y})
    return {"u": u, "x_hat_dot": rhs}


def collective_protocol_eval(cs, signals, mode):
    """Matrix form of :func:`distributed_protocol_eval` for all agents at once."""
    mode = normalize_mode(mode)
    x = np.concatenate([np.asarray(v, dtype=float).reshape(-1) for v in signals["x"]])
    x0 = np.asarray(signals["x0"], dtype=float)
    x0b = cs.stack_x0() @ x0
    if mode == "fi":
        return {"u": cs.M @ (cs.F0 @ x0b - cs.F @ x)}
    xh = np.concatenate([np.asarray(v, dtype=float).reshape(-1) for v in signals["x_hat"]])
    LMe = cs.L @ cs.M_est
    if mode == "observer":
        u = cs.M @ (cs.F0 @ x0b - cs.F @ xh)
        return {"u": u, "x_hat_dot": cs.A @ xh + cs.B @ u + LMe @ (cs.C @ (x - xh))}
    u = -cs.M @ cs.F @ xh
    e_y = cs.C @ x - cs.C0_bar() @ x0b
    return {"u": u, "x_hat_dot": cs.A @ xh + cs.B @ u + LMe @ (e_y - cs.C @ xh)}


# --- certificates ---------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    abscissa_F: float
    abscissa_L: float
    abscissa_modes: dict
    separation_error: float
    tol: float

    @property
    def hurwitz_F(self):
        return self.abscissa_F < -self.tol

    @property
    def hurwitz_L(self):
        return self.abscissa_L < -self.tol

    @property
    def separation_ok(self):
        return self.separation_error <= 1e-6

    @property
    def passed(self):
        return (self.hurwitz_F and self.hurwitz_L and self.separation_ok
                and all(a < -self.tol for a in self.abscissa_modes.values()))

    def as_dict(self):
        return {"passed": self.passed, "abscissa_A_minus_BMF": self.abscissa_F,
                "abscissa_A_minus_LMC": self.abscissa_L, "abscissa_modes": dict(self.abscissa_modes),
                "separation_error": self.separation_error, "separation_ok": self.separation_ok}


def match_spectra(a, b):
    """Largest distance under the optimal one-to-one matching of two multisets."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return np.inf
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max()) if a.size else 0.0


def verify_stability(cs, modes=MODES, policy=DEFAULT_POLICY):
    AF = cs.A - cs.B @ cs.M @ cs.F
    AL = cs.A - cs.L @ cs.M_est @ cs.C
    eF, eL = np.linalg.eigvals(AF), np.linalg.eigvals(AL)
    absc = {}
    sep = 0.0
    for mode in modes:
        try:
            cl = closed_loop(cs, mode)
        except ValidationError:
            continue
        ev = np.linalg.eigvals(cl.A_cl)
        absc[normalize_mode(mode)] = float(ev.real.max())
        if cl.A_cl.shape[0] == 2 * AF.shape[0]:
            scale = max(1.0, float(np.max(np.abs(ev))))
            sep = max(sep, match_spectra(ev, np.concatenate([eF, eL])) / scale)
    return StabilityReport(float(eF.real.max()), float(eL.real.max()), absc, sep,
                           policy.hurwitz_tol)


def delta_at(cs, omega):
    """``Delta(j w) = C (jwI - A + BMF)^{-1} B M - C (jwI - A + BF)^{-1} B``."""
    A, B, C = cs.A, cs.B, cs.C
    I = np.eye(A.shape[0])
    s = 1j * float(omega)
    K1 = s * I - A + B @ cs.M @ cs.F
    K2 = s * I - A + B @ cs.F
    for K in (K1, K2):
        if np.linalg.cond(K) > 1e12:
            raise NumericalError(f"resolvent nearly singular at omega={omega:g}")
    return C @ np.linalg.solve(K1, B @ cs.M) - C @ np.linalg.solve(K2, B)
