"""Dense linear algebra for continuous-time control design.

Everything here is desk-scale: Kronecker vectorisation for Sylvester
equations, Hamiltonian eigenvectors plus Newton polishing for Riccati
equations. Dimensions up to a few tens of states are the intended range.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, NumericalError, ValidationError
from .numeric import DEFAULT_POLICY


def _mat(x, name):
    a = np.array(x, dtype=float, ndmin=2)
    if a.ndim != 2:
        raise ValidationError(f"{name} must be a matrix")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class StateSpace:
    """Strictly proper realization ``x' = A x + B u``, ``y = C x``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A, B, C = _mat(self.A, "A"), _mat(self.B, "B"), _mat(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValidationError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValidationError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValidationError(f"C has {C.shape[1]} columns, expected {n}")
        for name, arr in (("A", A), ("B", B), ("C", C)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def evaluate(self, s):
        """Transfer matrix ``C (sI - A)^{-1} B`` at a complex point."""
        return self.C @ np.linalg.solve(s * np.eye(self.n) - self.A, self.B)


@dataclass(frozen=True)
class CareSolution:
    X: np.ndarray
    residual: float
    closed_loop_spectrum: np.ndarray


@dataclass(frozen=True)
class SprReport:
    passed: bool
    hurwitz: bool
    min_eigenvalue: float
    worst_omega: float

    def as_dict(self):
        return {"passed": self.passed, "hurwitz": self.hurwitz,
                "min_eigenvalue": self.min_eigenvalue, "worst_omega": self.worst_omega}


# --- Sylvester / Lyapunov -------------------------------------------------

def solve_sylvester(A, B, C, policy=DEFAULT_POLICY):
    """Solve ``A X + X B = C`` by vectorisation."""
    A, B, C = _mat(A, "A"), _mat(B, "B"), _mat(C, "C")
    n, m = A.shape[0], B.shape[0]
    if A.shape != (n, n) or B.shape != (m, m) or C.shape != (n, m):
        raise ValidationError(f"incompatible shapes {A.shape}, {B.shape}, {C.shape}")
    gaps = np.abs(np.linalg.eigvals(A)[:, None] + np.linalg.eigvals(B)[None, :])
    scale = 1.0 + max(np.linalg.norm(A, 2), np.linalg.norm(B, 2))
    if gaps.min() <= 1e-13 * scale:
        raise NumericalError("resonant spectra: A and -B share an eigenvalue")
    K = np.kron(np.eye(m), A) + np.kron(B.T, np.eye(n))
    try:
        x = np.linalg.solve(K, C.reshape(-1, order="F"))
    except np.linalg.LinAlgError:
        raise NumericalError("resonant spectra: singular Kronecker sum") from None
    X = x.reshape((n, m), order="F")
    res = np.linalg.norm(A @ X + X @ B - C)
    if res > policy.sylvester_rtol * (1.0 + np.linalg.norm(C)):
        raise NumericalError(f"Sylvester residual {res:.3e} too large (ill-conditioned)")
    return X


def solve_lyapunov(A, Q, policy=DEFAULT_POLICY):
    """Solve ``A' X + X A + Q = 0``."""
    A = _mat(A, "A")
    X = solve_sylvester(A.T, A, -_mat(Q, "Q"), policy)
    return 0.5 * (X + X.T)


# --- Riccati ----------------------------------------------------------------

def _stable_basis(H, n, policy):
    w, V = np.linalg.eig(H)
    if np.any(np.abs(w.real) <= policy.imag_axis_tol):
        raise NumericalError("no stabilizing solution: Hamiltonian has imaginary-axis eigenvalues")
    cols = []
    for k in np.argsort(w.real):
        lam = w[k]
        if lam.real >= 0:
            break
        if abs(lam.imag) <= 1e-12 * (1.0 + abs(lam)):
            cols.append(V[:, k].real)
        elif lam.imag > 0:
            cols.extend([V[:, k].real, V[:, k].imag])
    if len(cols) != n:
        raise NumericalError("no stabilizing solution: stable subspace has wrong dimension")
    return np.column_stack(cols)


def _schur_basis(H, n):
    T, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise NumericalError("no stabilizing solution: stable subspace has wrong dimension")
    return Z[:, :n]


def _riccati_residual(A, G, Q, X):
    return float(np.linalg.norm(A.T @ X + X @ A - X @ G @ X + Q))


def solve_riccati(A, G, Q, policy=DEFAULT_POLICY):
    """Stabilizing solution of ``A' X + X A - X G X + Q = 0`` (``G``, ``Q`` symmetric).

    Returns a :class:`CareSolution`; the closed loop is ``A - G X``.
    """
    A, G, Q = _mat(A, "A"), _mat(G, "G"), _mat(Q, "Q")
    n = A.shape[0]
    if A.shape != (n, n) or G.shape != (n, n) or Q.shape != (n, n):
        raise ValidationError("A, G, Q must be square of equal size")
    G = 0.5 * (G + G.T)
    Q = 0.5 * (Q + Q.T)
    H = np.block([[A, -G], [-Q, -A.T]])

    X = None
    for basis in (_stable_basis, _schur_basis):
        U = basis(H, n) if basis is _schur_basis else basis(H, n, policy)
        U1, U2 = U[:n], U[n:]
        if np.linalg.cond(U1) < 1e12:
            X = np.linalg.solve(U1.T, U2.T).T
            break
    if X is None:
        raise NumericalError("subspace extraction failed: X1 singular")
    X = 0.5 * (X + X.T)

    # Newton (Kleinman) polishing; a step is kept only if it lowers the residual.
    res = _riccati_residual(A, G, Q, X)
    for _ in range(policy.newton_steps):
        if res <= 1e-14 * (1.0 + np.linalg.norm(X)):
            break
        Ak = A - G @ X
        if np.max(np.linalg.eigvals(Ak).real) >= 0:
            break
        try:
            Xn = solve_lyapunov(Ak, Q + X @ G @ X, policy)
        except NumericalError:
            break
        rn = _riccati_residual(A, G, Q, Xn)
        if not rn < res:
            break
        X, res = Xn, rn

    if res > policy.care_rtol * (1.0 + np.linalg.norm(X)):
        raise ConvergenceError(f"convergence failure: Riccati residual {res:.3e}")
    spec = np.linalg.eigvals(A - G @ X)
    if np.max(spec.real) >= -policy.hurwitz_tol:
        raise NumericalError("no stabilizing solution: closed loop not Hurwitz")
    X.setflags(write=False)
    return CareSolution(X=X, residual=res, closed_loop_spectrum=spec)


def solve_care(A, B, Q, policy=DEFAULT_POLICY):
    """Stabilizing ``X >= 0`` of ``A' X + X A - X B B' X + Q = 0``.

    For the filter equation ``A Y + Y A' - Y C' C Y + Qt = 0`` call
    ``solve_care(A.T, C.T, Qt)``.
    """
    A, B = _mat(A, "A"), _mat(B, "B")
    return solve_riccati(A, B @ B.T, Q, policy)


# --- stability and structural tests -----------------------------------------

def spectral_abscissa(A):
    A = _mat(A, "A")
    if A.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(A).real))


def is_hurwitz(A, tol=DEFAULT_POLICY.hurwitz_tol):
    return spectral_abscissa(A) < -tol


def _rank(M, rtol):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def pbh_test(A, M, side="control", policy=DEFAULT_POLICY):
    """PBH stabilizability (``side='control'``, ``M=B``) or detectability
    (``side='observation'``, ``M=C``) test."""
    A, M = _mat(A, "A"), _mat(M, "M")
    if side == "observation":
        A, M = A.T, M.T
    elif side != "control":
        raise ValidationError(f"unknown side {side!r}")
    n = A.shape[0]
    if M.shape[0] != n:
        raise ValidationError("dimension mismatch in PBH test")
    for lam in np.linalg.eigvals(A):
        if lam.real >= -policy.hurwitz_tol:
            if _rank(np.hstack([lam * np.eye(n) - A, M]), policy.pbh_rtol) < n:
                return False
    return True


def rosenbrock_full_row_rank(ss, s, policy=DEFAULT_POLICY):
    """Whether ``[[sI - A, B], [-C, 0]]`` has full row rank ``n + p`` at ``s``."""
    P = np.block([[s * np.eye(ss.n) - ss.A, ss.B],
                  [-ss.C, np.zeros((ss.p, ss.m))]])
    return _rank(P, policy.pbh_rtol) == ss.n + ss.p


def transmission_zeros(ss):
    """Finite invariant zeros of a square system."""
    if ss.p != ss.m:
        raise ValidationError("transmission zeros are computed for square systems only")
    n, m = ss.n, ss.m
    a = np.block([[ss.A, ss.B], [ss.C, np.zeros((m, m))]])
    b = np.zeros_like(a)
    b[:n, :n] = np.eye(n)
    z = sla.eigvals(a, b)
    z = z[np.isfinite(z)]
    return z[np.abs(z) < 1e8]


def is_minimum_phase(ss, tol=DEFAULT_POLICY.hurwitz_tol):
    z = transmission_zeros(ss)
    return bool(np.all(z.real < -tol))


def _orth(M, rtol):
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((M.shape[0], 0))
    return U[:, s > rtol * s[0]]


def _reachable_subspace(A, B, rtol):
    V = _orth(B, rtol)
    while True:
        W = _orth(np.hstack([V, A @ V]), rtol)
        if W.shape[1] == V.shape[1]:
            return W
        V = W


def minimal_realization(ss, rtol=1e-9):
    """Controllable-then-observable restriction via orthonormal Krylov bases."""
    V = _reachable_subspace(ss.A, ss.B, rtol)
    A1, B1, C1 = V.T @ ss.A @ V, V.T @ ss.B, ss.C @ V
    if A1.shape[0] == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, ss.m)), np.zeros((ss.p, 0)))
    W = _reachable_subspace(A1.T, C1.T, rtol)
    return StateSpace(W.T @ A1 @ W, W.T @ B1, C1 @ W)


def eigenvalue_multiplicity(A, lam, rtol=1e-9):
    """Algebraic multiplicity of ``lam`` in ``A``.

    Computed as the dimension at which ``ker (A - lam I)^j`` stops growing.
    """
    A = np.asarray(A)
    n = A.shape[0]
    if n == 0:
        return 0
    N = A - lam * np.eye(n)
    scale = max(1.0, np.linalg.norm(N, 2))
    P = np.eye(n, dtype=complex)
    mult = 0
    for j in range(1, n + 1):
        P = P @ N
        k = int(np.sum(np.linalg.svd(P, compute_uv=False) <= rtol * scale ** j))
        if k == mult:
            break
        mult = k
    return mult


# --- frequency domain -------------------------------------------------------

def freq_response(ss, omega, input_gain=None, policy=DEFAULT_POLICY):
    """``C (j omega I - A)^{-1} B K`` with optional input-side matrix ``K``."""
    s = 1j * float(omega)
    if ss.n and np.min(np.abs(np.linalg.eigvals(ss.A) - s)) <= policy.imag_axis_tol:
        raise NumericalError(f"evaluation at pole: j*{omega} is an eigenvalue of A")
    T = ss.evaluate(s)
    if input_gain is not None:
        T = T @ np.asarray(input_gain)
    return T


def default_spr_grid():
    return np.concatenate([[0.0], np.logspace(-3, 3, 200)])


def check_spr(ss, grid=None, tol=DEFAULT_POLICY.spr_tol, policy=DEFAULT_POLICY):
    """Sampled strict positive realness: Hurwitz and ``T + T^* > tol`` on a grid.

    A grid certificate only; behaviour between samples and as omega grows
    without bound is not examined.
    """
    if ss.p != ss.m:
        raise ValidationError(f"SPR needs a square system, got {ss.p}x{ss.m}")
    grid = default_spr_grid() if grid is None else np.asarray(grid, dtype=float)
    hurwitz = is_hurwitz(ss.A, policy.hurwitz_tol)
    if not hurwitz:
        return SprReport(False, False, float("nan"), float("nan"))
    worst, worst_w = np.inf, float("nan")
    for w in grid:
        T = ss.evaluate(1j * w)
        lam = float(np.linalg.eigvalsh(T + T.conj().T)[0])
        if lam < worst:
            worst, worst_w = lam, float(w)
    return SprReport(bool(worst > tol), True, worst, worst_w)
