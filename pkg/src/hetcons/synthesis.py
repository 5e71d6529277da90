"""Per-agent controller synthesis.

Covers local state-feedback and estimator gains (LQG, H-infinity loop
shaping, LQG/LTR), the epsilon-scaled fallback used when the graph scaling is
not available, the internal-model check on each agent and the weighting
filters that repair it, and feedforward design through the regulator
equations.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .ctl_linalg import (StateSpace, check_spr, default_spr_grid, eigenvalue_multiplicity,
                         freq_response, is_minimum_phase, minimal_realization, pbh_test,
                         rosenbrock_full_row_rank, solve_care, solve_riccati)
from .errors import (ConvergenceError, NumericalError, ParameterError, UnsupportedError,
                     ValidationError)
from .numeric import DEFAULT_POLICY

METHODS = ("lqg", "hinf", "lqg_ltr")


# --- domain types -------------------------------------------------------------

@dataclass(frozen=True)
class Agent:
    """One agent. ``base`` and ``weighting`` are set on weighted agents and map
    the augmented state back onto the original plant."""

    id: int
    plant: StateSpace
    label: str = ""
    base: "Agent | None" = None
    weighting: "WeightingFilter | None" = None

    @property
    def plant_states(self):
        return self.base.plant.n if self.base is not None else self.plant.n

    def physical_state(self, x):
        return np.asarray(x)[..., :self.plant_states]

    def check_realization(self, policy=DEFAULT_POLICY):
        p = self.plant
        if not pbh_test(p.A, p.B, "control", policy):
            raise ValidationError(f"agent {self.id}: (A, B) is not stabilizable")
        if not pbh_test(p.A, p.C, "observation", policy):
            raise ValidationError(f"agent {self.id}: (C, A) is not detectable")


def _group_eigenvalues(A, tol=1e-6):
    """Distinct eigenvalues with algebraic multiplicities (clustered)."""
    groups = []
    for lam in np.linalg.eigvals(A):
        for g in groups:
            if abs(g[0] - lam) <= tol * (1.0 + abs(lam)):
                g[1].append(lam)
                break
        else:
            groups.append([lam, [lam]])
    out = []
    for _, members in groups:
        lam = complex(np.mean(members))
        re = 0.0 if abs(lam.real) <= tol else lam.real
        im = 0.0 if abs(lam.imag) <= tol else lam.imag
        out.append((complex(re, im), len(members)))
    return sorted(out, key=lambda e: (e[0].imag, e[0].real))


@dataclass(frozen=True)
class ReferenceModel:
    """Exosystem ``x0' = A0 x0``, ``y0 = C0 x0`` with marginal eigenvalues."""

    A0: np.ndarray
    C0: np.ndarray
    x0_init: np.ndarray
    kind: str = "custom"
    omega0: float | None = None
    amplitude: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        A0 = np.array(self.A0, dtype=float, ndmin=2)
        C0 = np.array(self.C0, dtype=float, ndmin=2)
        x0 = np.array(self.x0_init, dtype=float).reshape(-1)
        n0 = A0.shape[0]
        if A0.shape != (n0, n0) or C0.shape[1] != n0 or x0.shape != (n0,):
            raise ValidationError("reference model dimensions are inconsistent")
        if np.any(np.abs(np.linalg.eigvals(A0).real) > DEFAULT_POLICY.imag_axis_tol):
            raise ValidationError("reference model eigenvalues must lie on the imaginary axis")
        for name, arr in (("A0", A0), ("C0", C0), ("x0_init", x0)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def step(cls, amplitude=1.0):
        return cls([[0.0]], [[1.0]], [amplitude], kind="step", amplitude=amplitude)

    @classmethod
    def ramp(cls, slope=1.0):
        return cls([[0.0, 1.0], [0.0, 0.0]], [[1.0, 0.0]], [0.0, slope],
                   kind="ramp", amplitude=slope)

    @classmethod
    def sinusoid(cls, omega0, amplitude=1.0, phase=0.0):
        """``y0 = amplitude * cos(omega0 t + phase)``; state ``(sin, cos)`` scaled."""
        if omega0 <= 0:
            raise ValidationError("omega0 must be positive")
        x0 = amplitude * np.array([np.sin(phase), np.cos(phase)])
        return cls([[0.0, omega0], [-omega0, 0.0]], [[0.0, 1.0]], x0,
                   kind="sinusoid", omega0=float(omega0), amplitude=amplitude, phase=phase)

    @property
    def n0(self):
        return self.A0.shape[0]

    @property
    def p(self):
        return self.C0.shape[0]

    def eigen_structure(self):
        return _group_eigenvalues(self.A0)


@dataclass(frozen=True)
class WeightingFilter:
    """Scalar weight ``W(s) = num(s)/den(s)`` applied on every input channel,
    realized in controllable canonical form (``D`` is nonzero when biproper)."""

    num: tuple
    den: tuple
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    zero: float | None = None
    gain: float | None = None
    description: str = ""

    @classmethod
    def from_tf(cls, num, den, zero=None, gain=None, description=""):
        num = np.trim_zeros(np.atleast_1d(np.asarray(num, dtype=float)), "f")
        den = np.trim_zeros(np.atleast_1d(np.asarray(den, dtype=float)), "f")
        if den.size == 0 or num.size == 0:
            raise ValidationError("weighting numerator and denominator must be nonzero")
        if num.size > den.size:
            raise ValidationError("weighting filter must be proper")
        num, den = num / den[0], den / den[0]
        r = den.size - 1
        b = np.concatenate([np.zeros(den.size - num.size), num])
        d = b[0]
        # coefficients in ascending powers
        a_asc, b_asc = den[::-1][:r], b[::-1][:r]
        c = b_asc - d * a_asc
        A = np.zeros((r, r))
        if r:
            A[:-1, 1:] = np.eye(r - 1)
            A[-1, :] = -a_asc
        B = np.zeros((r, 1))
        if r:
            B[-1, 0] = 1.0
        return cls(tuple(num), tuple(den), A, B, c.reshape(1, r), np.array([[d]]),
                   zero=zero, gain=gain, description=description)

    @classmethod
    def internal_model(cls, poles, zero=1.0, gain=1.0, description=""):
        """``W(s) = gain * (s + zero) / prod(s - pole)``."""
        den = np.real_if_close(np.poly(np.asarray(poles, dtype=complex)), tol=1e6)
        if np.iscomplexobj(den):
            raise ValidationError("weighting poles must come in conjugate pairs")
        num = gain * np.array([1.0, zero]) if len(poles) else np.array([gain])
        return cls.from_tf(num, den, zero=zero, gain=gain, description=description)

    @classmethod
    def sinusoid(cls, omega0, zero=1.0, gain=None):
        gain = omega0 ** 2 if gain is None else gain
        return cls.internal_model([1j * omega0, -1j * omega0], zero, gain,
                                  f"k(s+z)/(s^2+{omega0:g}^2)")

    @classmethod
    def integrator(cls, order, zero=1.0, gain=1.0):
        return cls.internal_model([0.0] * order, zero, gain, f"k(s+z)/s^{order}")

    @property
    def order(self):
        return self.A.shape[0]

    @property
    def poles(self):
        return np.roots(self.den) if self.order else np.zeros(0)

    def is_identity(self):
        return self.order == 0 and float(self.D[0, 0]) == 1.0

    def realization(self, channels):
        """Block-diagonal realization acting on ``channels`` inputs."""
        I = np.eye(channels)
        return (np.kron(I, self.A), np.kron(I, self.B), np.kron(I, self.C), np.kron(I, self.D))

    def as_dict(self):
        return {"num": list(self.num), "den": list(self.den), "zero": self.zero,
                "gain": self.gain, "description": self.description}


@dataclass(frozen=True)
class AgentGains:
    agent_id: int
    F: np.ndarray
    L: np.ndarray
    method: str
    F0: np.ndarray | None = None
    Pi: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def as_dict(self):
        out = {"agent": self.agent_id, "method": self.method,
               "F": self.F.tolist(), "L": self.L.tolist()}
        if self.F0 is not None:
            out["F0"] = self.F0.tolist()
        if self.Pi is not None:
            out["Pi"] = self.Pi.tolist()
        out["diagnostics"] = _jsonable(self.diagnostics)
        return out


@dataclass(frozen=True)
class GainSet:
    gains: tuple
    method: str

    def __iter__(self):
        return iter(self.gains)

    def __len__(self):
        return len(self.gains)

    def __getitem__(self, k):
        return self.gains[k]

    def validate(self, agents, reference=None, policy=DEFAULT_POLICY):
        """Raise unless every local loop is Hurwitz and, where the internal
        model is present, the regulator identities ``A Pi = Pi A0`` and
        ``F0 = F Pi`` hold."""
        from .ctl_linalg import is_hurwitz
        for ag, g in zip(agents, self.gains):
            p = ag.plant
            if not is_hurwitz(p.A - p.B @ g.F, policy.hurwitz_tol):
                raise NumericalError(f"agent {ag.id}: A - B F is not Hurwitz")
            if not is_hurwitz(p.A - g.L @ p.C, policy.hurwitz_tol):
                raise NumericalError(f"agent {ag.id}: A - L C is not Hurwitz")
            if reference is not None and g.Pi is not None:
                if check_assumption_a(ag, reference, policy).passed:
                    e1 = np.linalg.norm(p.A @ g.Pi - g.Pi @ reference.A0)
                    e2 = np.linalg.norm(g.F0 - g.F @ g.Pi)
                    if e1 > 1e-6 or e2 > 1e-6:
                        raise NumericalError(
                            f"agent {ag.id}: regulator identities violated ({e1:.2e}, {e2:.2e})")

    def as_dict(self):
        return {"method": self.method, "agents": [g.as_dict() for g in self.gains]}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "as_dict"):
        return _jsonable(obj.as_dict())
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


# --- internal-model condition and weighting ---------------------------------------------

@dataclass(frozen=True)
class EigenCheck:
    eigenvalue: complex
    multiplicity: int
    column_orders: tuple
    deficit: int
    not_a_zero: bool

    @property
    def passed(self):
        return self.deficit == 0 and self.not_a_zero

    def as_dict(self):
        return {"eigenvalue": [self.eigenvalue.real, self.eigenvalue.imag],
                "multiplicity": self.multiplicity, "column_orders": list(self.column_orders),
                "deficit": self.deficit, "not_a_zero": self.not_a_zero, "passed": self.passed}


@dataclass(frozen=True)
class AssumptionReport:
    agent_id: int
    input_dim_ok: bool
    checks: tuple

    @property
    def passed(self):
        return self.input_dim_ok and all(c.passed for c in self.checks)

    def deficits(self):
        return {c.eigenvalue: c.deficit for c in self.checks if c.deficit}

    def as_dict(self):
        return {"agent": self.agent_id, "passed": self.passed, "input_dim_ok": self.input_dim_ok,
                "eigenvalues": [c.as_dict() for c in self.checks]}


def check_assumption_a(agent, ref, policy=DEFAULT_POLICY):
    """Every exosystem eigenvalue must be a pole of each column of the agent's
    transfer matrix (with at least its multiplicity) and not a transmission
    zero; the agent needs at least as many inputs as outputs."""
    plant = agent.plant
    if plant.p != ref.p:
        raise ValidationError(
            f"agent {agent.id}: output dimension {plant.p} differs from reference {ref.p}")
    checks = []
    for lam, mu in ref.eigen_structure():
        orders = []
        for j in range(plant.m):
            col = minimal_realization(StateSpace(plant.A, plant.B[:, [j]], plant.C))
            orders.append(eigenvalue_multiplicity(col.A, lam) if col.n else 0)
        deficit = max(0, mu - min(orders)) if orders else mu
        checks.append(EigenCheck(lam, mu, tuple(orders), deficit,
                                 rosenbrock_full_row_rank(plant, lam, policy)))
    return AssumptionReport(agent.id, plant.p <= plant.m, tuple(checks))


def propose_weighting(agent, ref, zero=1.0, gain=None, policy=DEFAULT_POLICY):
    """Weight ``k (s + z) / prod (s - s_k)^deficit`` supplying the missing
    internal-model poles, or ``None`` when the agent already has them."""
    report = check_assumption_a(agent, ref, policy)
    poles = []
    for c in report.checks:
        poles.extend([c.eigenvalue] * c.deficit)
    if not poles:
        return None
    if gain is None:
        gain = ref.omega0 ** 2 if ref.kind == "sinusoid" else 1.0
    if ref.kind == "sinusoid" and len(poles) == 2:
        return WeightingFilter.sinusoid(ref.omega0, zero, gain)
    if all(p == 0 for p in poles):
        return WeightingFilter.integrator(len(poles), zero, gain)
    return WeightingFilter.internal_model(poles, zero, gain, "k(s+z)/prod(s-s_k)")


def augment_with_weighting(agent, w):
    """Series connection ``P(s) W(s)`` with the weight at the plant input."""
    if w is None or w.is_identity():
        return agent
    p = agent.plant
    Aw, Bw, Cw, Dw = w.realization(p.m)
    nw = Aw.shape[0]
    A = np.block([[p.A, p.B @ Cw], [np.zeros((nw, p.n)), Aw]])
    B = np.vstack([p.B @ Dw, Bw])
    C = np.hstack([p.C, np.zeros((p.p, nw))])
    base = agent.base if agent.base is not None else agent
    return Agent(agent.id, StateSpace(A, B, C), agent.label, base=base, weighting=w)


# --- gain synthesis -------------------------------------------------------------

def loop_transfers(plant, F, L):
    """``T_F = F (sI - A + BF)^{-1} B`` and ``T_L = C (sI - A + LC)^{-1} L``."""
    return (StateSpace(plant.A - plant.B @ F, plant.B, F),
            StateSpace(plant.A - L @ plant.C, L, plant.C))


def closed_loop_tf(plant, F):
    """``T(s) = C (sI - A + BF)^{-1} B``, the reference-to-output map of one loop."""
    return StateSpace(plant.A - plant.B @ F, plant.B, plant.C)


def hinf_filter_delta(X, Y, B, gamma):
    """``Delta = (gamma^2 - 1)^{-1} (I + Y X) B B' (I + X Y)``."""
    I = np.eye(X.shape[0])
    return (I + Y @ X) @ B @ B.T @ (I + X @ Y) / (gamma ** 2 - 1.0)


def hinf_filter_residual(A, B, C, X, Y, gamma):
    D = hinf_filter_delta(X, Y, B, gamma)
    R = A @ Y + Y @ A.T - Y @ C.T @ C @ Y + B @ B.T + D
    return float(np.linalg.norm(R))


def solve_hinf_filter(A, B, C, X, gamma, policy=DEFAULT_POLICY):
    """Stabilizing ``Y >= 0`` of the loop-shaping filter equation
    ``A Y + Y A' - Y C'C Y + B B' + Delta(Y) = 0``.

    ``Delta`` is quadratic in ``Y``; expanding it gives an explicit Riccati
    equation with an indefinite quadratic term, solved in one shot.
    """
    g = 1.0 / (gamma ** 2 - 1.0)
    BB = B @ B.T
    At = A + g * BB @ X
    G = C.T @ C - g * X @ BB @ X
    sol = solve_riccati(At.T, G, (1.0 + g) * BB, policy)
    return sol.X


def hinf_filter_fixed_point(A, B, C, X, gamma, tol=None, maxiter=None, damping=1.0,
                            policy=DEFAULT_POLICY):
    """Successive substitution for the same filter equation, starting from
    ``Delta = 0``. Converges linearly; kept as an independent route."""
    tol = policy.fixed_point_tol if tol is None else tol
    maxiter = policy.fixed_point_maxiter if maxiter is None else maxiter
    BB = B @ B.T
    Y = solve_care(A.T, C.T, BB, policy).X
    for it in range(1, maxiter + 1):
        Yn = solve_care(A.T, C.T, BB + hinf_filter_delta(X, Y, B, gamma), policy).X
        Yn = (1.0 - damping) * Y + damping * Yn
        step = np.max(np.abs(Yn - Y))
        Y = Yn
        if step <= tol * (1.0 + np.max(np.abs(Y))):
            return Y, it
    raise ConvergenceError(f"H-infinity filter fixed point did not converge in {maxiter} steps")


def ltr_recovery_error(plant, F, L, grid=None):
    """Largest relative gap between the observer-based loop ``K P`` and the
    state-feedback loop ``F (sI - A)^{-1} B`` at the plant input."""
    grid = default_spr_grid() if grid is None else grid
    A, B, C = plant.A, plant.B, plant.C
    n = A.shape[0]
    worst = 0.0
    for w in grid:
        s = 1j * w
        try:
            P = C @ np.linalg.solve(s * np.eye(n) - A, B)
            LF = F @ np.linalg.solve(s * np.eye(n) - A, B)
            K = F @ np.linalg.solve(s * np.eye(n) - A + B @ F + L @ C, L)
        except np.linalg.LinAlgError:
            continue
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(LF))):
            continue
        worst = max(worst, np.linalg.norm(K @ P - LF, 2) / (1.0 + np.linalg.norm(LF, 2)))
    return float(worst)


def synth_gains(agent, method="lqg", Q=None, Qtilde=None, gamma=None, gamma_factor=None,
                q=None, policy=DEFAULT_POLICY):
    """Local feedback ``F = B'X`` and estimator ``L = Y C'`` for one agent.

    ``lqg`` uses ``Q`` and ``Qtilde`` (defaults ``C'C`` and ``BB'``),
    ``hinf`` the loop-shaping pair with ``gamma`` (default
    ``gamma_factor * gamma_opt``), ``lqg_ltr`` the recovery weight ``q^2 BB'``.
    """
    if method not in METHODS:
        raise ValidationError(f"unknown synthesis method {method!r}")
    p = agent.plant
    A, B, C = p.A, p.B, p.C
    CC, BB = C.T @ C, B @ B.T
    diag = {}

    Qx = CC if (method != "lqg" or Q is None) else np.asarray(Q, dtype=float)
    xs = solve_care(A, B, Qx, policy)
    X = xs.X
    diag["care_residual_X"] = xs.residual

    if method == "lqg":
        Qy = BB if Qtilde is None else np.asarray(Qtilde, dtype=float)
        ys = solve_care(A.T, C.T, Qy, policy)
        Y = ys.X
        diag["care_residual_Y"] = ys.residual
    elif method == "hinf":
        Z = solve_care(A.T, C.T, BB, policy).X
        gamma_opt = float(np.sqrt(1.0 + np.max(np.linalg.eigvals(X @ Z).real)))
        if gamma is None:
            gamma = (policy.gamma_factor if gamma_factor is None else gamma_factor) * gamma_opt
        if gamma <= gamma_opt:
            raise ParameterError(f"agent {agent.id}: gamma={gamma:.6g} must exceed "
                                 f"gamma_opt={gamma_opt:.6g}")
        Y = solve_hinf_filter(A, B, C, X, gamma, policy)
        res = hinf_filter_residual(A, B, C, X, Y, gamma)
        if res > policy.hinf_residual_tol * (1.0 + np.linalg.norm(Y)):
            raise ConvergenceError(f"agent {agent.id}: H-infinity filter residual {res:.3e}")
        diag.update(gamma_opt=gamma_opt, gamma=float(gamma), hinf_filter_residual=res)
    else:
        if p.p != p.m:
            raise UnsupportedError(f"agent {agent.id}: LQG/LTR needs a square plant")
        if not is_minimum_phase(p):
            raise UnsupportedError(f"agent {agent.id}: LQG/LTR on a non-minimum-phase plant")
        q = policy.ltr_q if q is None else float(q)
        if q <= 0:
            raise ParameterError("LTR parameter q must be positive")
        ys = solve_care(A.T, C.T, q ** 2 * BB, policy)
        Y = ys.X
        diag.update(q=q, care_residual_Y=ys.residual)

    F = B.T @ X
    L = Y @ C.T
    TF, TL = loop_transfers(p, F, L)
    diag["spr_F"] = check_spr(TF, tol=policy.spr_tol, policy=policy)
    diag["spr_L"] = check_spr(TL, tol=policy.spr_tol, policy=policy)
    if method == "lqg_ltr":
        diag["ltr_recovery_error"] = ltr_recovery_error(p, F, L)
    for arr in (F, L):
        arr.setflags(write=False)
    return AgentGains(agent.id, F, L, method, diagnostics=diag)


def epsilon_scaled_gains(F, d_max, eps=None):
    """``F_eps = F / eps`` for use with the unscaled interconnection.

    Requires ``0 < eps < 2 / d_max``; the default is ``1 / d_max``.
    """
    if d_max <= 0:
        raise ParameterError("d_max must be positive")
    eps = 1.0 / d_max if eps is None else float(eps)
    if not 0.0 < eps < 2.0 / d_max:
        raise ParameterError(f"epsilon={eps:g} outside (0, {2.0 / d_max:g})")
    return [np.asarray(f, dtype=float) / eps for f in F]


# --- feedforward -----------------------------------------------------------------

def solve_regulator_eqs(agent, F, ref, policy=DEFAULT_POLICY):
    """Solve ``(A - B F) Pi + B F0 = Pi A0`` and ``C Pi = C0`` for ``(Pi, F0)``."""
    p = agent.plant
    A, B, C = p.A, p.B, p.C
    F = np.asarray(F, dtype=float)
    n, m, n0 = p.n, p.m, ref.n0
    Acl = A - B @ F
    In0 = np.eye(n0)
    top = np.hstack([np.kron(In0, Acl) - np.kron(ref.A0.T, np.eye(n)), np.kron(In0, B)])
    bot = np.hstack([np.kron(In0, C), np.zeros((p.p * n0, m * n0))])
    K = np.vstack([top, bot])
    rhs = np.concatenate([np.zeros(n * n0), ref.C0.reshape(-1, order="F")])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    Pi = sol[:n * n0].reshape((n, n0), order="F")
    F0 = sol[n * n0:].reshape((m, n0), order="F")
    r1 = np.linalg.norm(Acl @ Pi + B @ F0 - Pi @ ref.A0)
    r2 = np.linalg.norm(C @ Pi - ref.C0)
    if max(r1, r2) > policy.regulator_rtol * (1.0 + np.linalg.norm(ref.C0)):
        raise NumericalError(f"agent {agent.id}: regulator equations unsolvable "
                             f"(internal-model condition violated?) residuals {r1:.2e}, {r2:.2e}")
    return Pi, F0


def pi_from_gains(C, F, C0, F0, A=None, A0=None):
    """``Pi`` from ``[C; F] Pi = [C0; F0]`` by pseudo-inverse.

    When ``[C; F]`` has fewer independent rows than the state dimension the
    pseudo-inverse only returns the minimum-norm member of a solution family.
    Passing ``A`` and ``A0`` adds ``A Pi = Pi A0``, which pins ``Pi`` down
    uniquely whenever ``A - BF`` is Hurwitz.
    """
    S = np.vstack([np.atleast_2d(C), np.atleast_2d(F)]).astype(float)
    R = np.vstack([np.atleast_2d(C0), np.atleast_2d(F0)]).astype(float)
    n = S.shape[1]
    if A is None or A0 is None or np.linalg.matrix_rank(S) == n:
        return np.linalg.pinv(S) @ R
    A, A0 = np.asarray(A, dtype=float), np.asarray(A0, dtype=float)
    n0 = A0.shape[0]
    K = np.vstack([np.kron(np.eye(n0), S),
                   np.kron(np.eye(n0), A) - np.kron(A0.T, np.eye(n))])
    rhs = np.concatenate([R.reshape(-1, order="F"), np.zeros(n * n0)])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol.reshape((n, n0), order="F")


def sinusoid_feedforward(T_at_w0, omega0, amplitude=1.0, phase=0.0):
    """Feedforward ``(F01, F02)`` for the canonical sinusoid exosystem.

    With ``x0 = (sin w0 t, cos w0 t)`` the loop output settles to
    ``amplitude * cos(w0 t + phase)`` when ``F01 + j F02`` has magnitude
    ``amplitude / |T(j w0)|`` and angle ``pi/2 + phase - angle T(j w0)``.
    """
    if omega0 <= 0:
        raise ValidationError("omega0 must be positive")
    T = complex(np.asarray(T_at_w0).reshape(-1)[0])
    if abs(T) <= 1e-9:
        raise NumericalError("plant has no gain at omega0")
    theta = np.pi / 2 + phase - np.angle(T)
    mag = amplitude / abs(T)
    return mag * np.cos(theta), mag * np.sin(theta)


def sinusoid_feedforward_for(agent, F, ref, policy=DEFAULT_POLICY):
    """Row vector ``F0`` from :func:`sinusoid_feedforward` for a SISO loop."""
    if ref.kind != "sinusoid":
        raise ValidationError("sinusoid feedforward needs a sinusoid reference")
    if agent.plant.m != 1 or agent.plant.p != 1:
        raise UnsupportedError(f"agent {agent.id}: sinusoid feedforward is SISO only")
    T = freq_response(closed_loop_tf(agent.plant, F), ref.omega0, policy=policy)
    f1, f2 = sinusoid_feedforward(T, ref.omega0)
    return np.array([[f1, f2]])


def with_feedforward(gains, Pi, F0):
    return replace(gains, Pi=np.asarray(Pi), F0=np.asarray(F0))
