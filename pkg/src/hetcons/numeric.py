"""Central numeric policy: every tolerance and default lives here."""

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class NumericPolicy:
    # graph
    margin: float = 0.1
    rank_rtol: float = 1e-12
    positivity_tol: float = 1e-12
    laplacian_tol: float = 1e-10
    # linear algebra
    hurwitz_tol: float = 1e-9
    imag_axis_tol: float = 1e-9
    sylvester_rtol: float = 1e-9
    care_rtol: float = 1e-8
    newton_steps: int = 8
    pbh_rtol: float = 1e-9
    pole_tol: float = 1e-9
    spr_tol: float = 1e-9
    # synthesis
    fixed_point_tol: float = 1e-9
    fixed_point_maxiter: int = 100
    hinf_residual_tol: float = 1e-7
    regulator_rtol: float = 1e-8
    gamma_factor: float = 1.1
    ltr_q: float = 10.0
    # simulation
    t_end: float = 40.0
    h: float = 1e-3
    decimation: int = 10
    consensus_tol: float = 1e-2

    def as_dict(self):
        return asdict(self)


DEFAULT_POLICY = NumericPolicy()
