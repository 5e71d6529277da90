import numpy as np
import pytest

from hetcons.ctl_linalg import StateSpace
from hetcons.errors import ValidationError
from hetcons.protocol import (assemble_collective, closed_loop, collective_protocol_eval,
                              consensus_coordinates, delta_at, distributed_protocol_eval,
                              match_spectra, verify_stability)
from hetcons.sim import integrate
from hetcons.synthesis import Agent, AgentGains, ReferenceModel

STEP = ReferenceModel.step()


def scalar_agent(i, a=0.0, b=1.0, c=1.0):
    return Agent(i, StateSpace([[a]], [[b]], [[c]]))


def gains(i, F=1.0, L=1.0, F0=1.0, Pi=1.0):
    return AgentGains(i, np.array([[F]]), np.array([[L]]), "lqg", np.array([[F0]]),
                      np.array([[Pi]]))


def test_single_agent_fi():
    cs = assemble_collective([scalar_agent(1)], [gains(1)], np.zeros((1, 1)), [2.1], 1, ref=STEP)
    cl = closed_loop(cs, "fi")
    np.testing.assert_allclose(cl.A_cl, [[-2.1]])
    np.testing.assert_allclose(cl.B_cl, [[2.1]])


def test_two_agents_blocks():
    ags = [scalar_agent(1, -1.0, 2.0, 3.0), scalar_agent(2, -4.0, 5.0, 6.0)]
    gs = [gains(1, 0.5, 0.25), gains(2, 0.75, 0.125)]
    adj = np.array([[0.0, 0.0], [1.0, 0.0]])
    cs = assemble_collective(ags, gs, adj, [1.0, 1.0], 1, ref=STEP)
    np.testing.assert_array_equal(cs.A, np.diag([-1.0, -4.0]))
    np.testing.assert_array_equal(cs.B, np.diag([2.0, 5.0]))
    np.testing.assert_array_equal(cs.C, np.diag([3.0, 6.0]))
    np.testing.assert_array_equal(cs.F, np.diag([0.5, 0.75]))
    np.testing.assert_array_equal(cs.L, np.diag([0.25, 0.125]))
    np.testing.assert_array_equal(cs.M, [[1.0, 0.0], [-1.0, 1.0]])


def test_assembly_dimension_errors():
    with pytest.raises(ValidationError, match=r"agents\[0\]: F"):
        assemble_collective([scalar_agent(1)], [AgentGains(1, np.ones((1, 2)), np.ones((1, 1)),
                                                           "lqg")],
                            np.zeros((1, 1)), [1.0], 1)
    with pytest.raises(ValidationError, match="gain sets"):
        assemble_collective([scalar_agent(1)], [], np.zeros((1, 1)), [1.0], 1)


def test_consensus_mode_needs_pi():
    g = AgentGains(1, np.eye(1), np.eye(1), "lqg")
    cs = assemble_collective([scalar_agent(1)], [g], np.zeros((1, 1)), [1.0], 1, ref=STEP)
    with pytest.raises(ValidationError, match="Pi"):
        closed_loop(cs, "consensus-observer")
    with pytest.raises(ValidationError, match="F0"):
        closed_loop(cs, "fi")
    with pytest.raises(ValidationError, match="mode"):
        closed_loop(cs, "telepathy")


def test_local_control_chain_example():
    # chain (2,1), (3,2) with d = (3, 2, 1): v = (1, 0, 0) gives M_D v = (3, -2, 0)
    ags = [scalar_agent(i) for i in (1, 2, 3)]
    gs = [gains(i) for i in (1, 2, 3)]
    adj = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
    cs = assemble_collective(ags, gs, adj, [3.0, 2.0, 1.0], 1, ref=STEP)
    v = [np.array([1.0]), np.array([0.0]), np.array([0.0])]
    u = [cs.control.apply_local(i, v[i - 1], {j: v[j - 1] for j in cs.control.neighbors(i)})
         for i in (1, 2, 3)]
    np.testing.assert_allclose(np.concatenate(u), [3.0, -2.0, 0.0])
    np.testing.assert_allclose(cs.M @ np.concatenate(v), [3.0, -2.0, 0.0])


def test_single_agent_distributed():
    cs = assemble_collective([scalar_agent(1)], [gains(1)], np.zeros((1, 1)), [2.1], 1, ref=STEP)
    np.testing.assert_allclose(cs.control.apply_local(1, np.array([1.0]), {}), [2.1])


@pytest.mark.parametrize("mode", ["fi", "observer", "consensus-observer"])
def test_distributed_equals_collective(sinusoid_design, mode):
    rep = sinusoid_design
    cs = rep.collective
    rng = np.random.default_rng(11)
    for _ in range(5):
        sig = {"x": [rng.standard_normal(ag.plant.n) for ag in rep.agents],
               "x_hat": [rng.standard_normal(ag.plant.n) for ag in rep.agents],
               "x0": rng.standard_normal(2)}
        coll = collective_protocol_eval(cs, sig, mode)
        loc = [distributed_protocol_eval(cs, i, sig, mode, rep.agents, list(rep.gains))
               for i in range(1, cs.N + 1)]
        for key in coll:
            stacked = np.concatenate([d[key] for d in loc])
            np.testing.assert_allclose(stacked, coll[key], atol=1e-12, rtol=0)


def test_separation_structure(sinusoid_design):
    cs = sinusoid_design.collective
    cl = closed_loop(cs, "observer")
    nx = cs.A.shape[0]
    np.testing.assert_array_equal(cl.A_cl[nx:, :nx], 0)
    eF = np.linalg.eigvals(cs.A - cs.B @ cs.M @ cs.F)
    eL = np.linalg.eigvals(cs.A - cs.L @ cs.M_est @ cs.C)
    assert match_spectra(np.linalg.eigvals(cl.A_cl), np.concatenate([eF, eL])) <= 1e-6


def test_stability_report(sinusoid_design):
    st = verify_stability(sinusoid_design.collective)
    assert st.passed
    assert set(st.abscissa_modes) == {"fi", "observer", "consensus-observer"}


def test_zero_feedback_not_hurwitz(sinusoid_design):
    from dataclasses import replace
    cs = sinusoid_design.collective
    st = verify_stability(replace(cs, F=np.zeros_like(cs.F)))
    assert not st.hurwitz_F and not st.passed


def test_single_stable_agent_without_feedback():
    g = AgentGains(1, np.zeros((1, 1)), np.ones((1, 1)), "lqg", np.zeros((1, 1)), np.ones((1, 1)))
    cs = assemble_collective([scalar_agent(1, -1.0)], [g], np.zeros((1, 1)), [1.0], 1, ref=STEP)
    assert verify_stability(cs, modes=("fi", "observer")).passed


def test_delta_single_agent_unit_d():
    cs = assemble_collective([scalar_agent(1, -1.0)], [gains(1)], np.zeros((1, 1)), [1.0], 1,
                             ref=STEP)
    for w in (0.0, 0.5, 3.0):
        np.testing.assert_allclose(delta_at(cs, w), 0, atol=1e-15)


def test_delta_certificate(sinusoid_design):
    cs = sinusoid_design.collective
    assert np.linalg.norm(delta_at(cs, 3.77), 2) <= 1e-6
    assert np.linalg.norm(delta_at(cs, 1.0), 2) > 1e-3


def test_consensus_observer_coordinates(sinusoid_design):
    """Mapping the simulated (x, x_hat_tilde, x0) through x_tilde = x - Pi x0_bar
    reproduces the autonomous error-coordinate closed loop."""
    rep = sinusoid_design
    cs = rep.collective
    cl = closed_loop(cs, "consensus-observer")
    tr = integrate(cl, rep.scenario.reference, t_end=5.0, decimation=100)
    E = consensus_coordinates(cs, cl, tr.states)
    from hetcons.sim import propagate
    _, E2 = propagate(cl.A_cl, E[0], 5.0, 1e-3, 100)
    np.testing.assert_allclose(E, E2, atol=1e-8 * (1 + np.abs(E).max()))
