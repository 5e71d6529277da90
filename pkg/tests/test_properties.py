"""Property tests over randomly generated graphs, systems and signals."""

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from hetcons.ctl_linalg import (StateSpace, is_hurwitz, pbh_test, solve_care, solve_sylvester)
from hetcons.errors import GraphError
from hetcons.graph import (Digraph, build_interconnection, build_matrices, check_rank_condition,
                           expand_blocks, find_dominance_scaling, reachable_nodes)
from hetcons.protocol import (assemble_collective, closed_loop, collective_protocol_eval,
                              distributed_protocol_eval, match_spectra)
from hetcons.sim import Trajectory, consensus_metrics, reference_output
from hetcons.synthesis import (Agent, AgentGains, ReferenceModel, WeightingFilter,
                               sinusoid_feedforward)

SETTINGS = settings(max_examples=60, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])


@st.composite
def digraphs(draw, max_n=8):
    n = draw(st.integers(1, max_n))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))
                  if pairs else st.just([]))
    weights = draw(st.lists(st.floats(0.1, 3.0), min_size=len(chosen), max_size=len(chosen)))
    return Digraph(n, tuple((i, j, w) for (i, j), w in zip(chosen, weights)))


def seeds():
    return st.integers(0, 2 ** 32 - 1)


@SETTINGS
@given(digraphs())
def test_laplacian_invariants(g):
    L = build_matrices(g).laplacian
    np.testing.assert_allclose(L.sum(axis=1), 0, atol=1e-12)
    assert np.min(np.linalg.eigvals(L).real) >= -1e-10


@SETTINGS
@given(digraphs())
def test_connectivity_rank_and_scaling_agree(g):
    L = build_matrices(g).laplacian
    roots = reachable_nodes(g)
    for k in range(1, g.n + 1):
        rank_ok = check_rank_condition(L, k)
        try:
            sc = find_dominance_scaling(L, k)
            MD = build_interconnection(sc, L)
            scale_ok = np.all(sc.d > 0) and np.linalg.eigvalsh(MD + MD.T)[0] >= 2.1 - 1e-9
        except GraphError:
            scale_ok = False
        assert (k in roots) == rank_ok == scale_ok


@SETTINGS
@given(st.integers(1, 4), st.integers(1, 3), seeds())
def test_block_expansion_uniform_is_kron(n, q, seed):
    M = np.random.default_rng(seed).standard_normal((n, n))
    np.testing.assert_array_equal(expand_blocks(M, [q] * n), np.kron(M, np.eye(q)))


@SETTINGS
@given(st.integers(1, 5), st.integers(1, 5), seeds())
def test_sylvester_residual(n, m, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 3 * np.eye(n)
    B = rng.standard_normal((m, m)) + 3 * np.eye(m)
    C = rng.standard_normal((n, m))
    X = solve_sylvester(A, B, C)
    assert np.linalg.norm(A @ X + X @ B - C) <= 1e-9 * (1 + np.linalg.norm(C))


@SETTINGS
@given(st.integers(1, 6), st.integers(1, 3), st.integers(1, 3), seeds())
def test_care_properties(n, m, p, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    assume(pbh_test(A, B, "control") and pbh_test(A, C, "observation"))
    X = solve_care(A, B, C.T @ C).X
    R = A.T @ X + X @ A - X @ B @ B.T @ X + C.T @ C
    assert np.linalg.norm(R) <= 1e-8 * (1 + np.linalg.norm(X))
    assert is_hurwitz(A - B @ B.T @ X)
    assert np.linalg.eigvalsh(X)[0] >= -1e-8 * (1 + np.linalg.norm(X))


@SETTINGS
@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0), st.floats(-np.pi, np.pi),
       st.floats(0.1, 5.0), st.floats(-np.pi, np.pi))
def test_sinusoid_feedforward_steady_state(w0, mag, ang, amp, phase):
    """r = F0 x0 pushed through T(j w0) reproduces amplitude * cos(w0 t + phase)."""
    T = mag * np.exp(1j * ang)
    f1, f2 = sinusoid_feedforward(T, w0, amp, phase)
    # x0 = (sin w0 t, cos w0 t) -> r = Re[(f2 - j f1) e^{j w0 t}] -> y = Re[T (f2 - j f1) e^{j w0 t}]
    phasor = T * (f2 - 1j * f1)
    np.testing.assert_allclose(phasor, amp * np.exp(1j * phase), rtol=1e-10, atol=1e-12)


@SETTINGS
@given(st.floats(0.1, 10.0), st.floats(-5.0, 5.0), st.floats(0.1, 50.0),
       st.floats(-3.0, 3.0), st.floats(0.1, 3.0))
def test_weighting_realization_matches_tf(w0, z, k, sr, si):
    w = WeightingFilter.sinusoid(w0, z, k)
    s = complex(sr, si)
    assume(abs(s * s + w0 * w0) > 1e-3)
    val = (w.C @ np.linalg.solve(s * np.eye(2) - w.A, w.B) + w.D)[0, 0]
    np.testing.assert_allclose(val, k * (s + z) / (s * s + w0 * w0), rtol=1e-9)
    np.testing.assert_allclose(np.sort(np.abs(w.poles.imag)), [w0, w0], rtol=1e-9)


@SETTINGS
@given(st.floats(0.1, 10.0), st.floats(0.1, 3.0), st.floats(-np.pi, np.pi),
       st.floats(0.0, 50.0))
def test_reference_closed_form_matches_expm(w0, amp, phase, t):
    from scipy.linalg import expm
    ref = ReferenceModel.sinusoid(w0, amp, phase)
    x, y = reference_output(ref, t)
    np.testing.assert_allclose(x, expm(ref.A0 * t) @ ref.x0_init, atol=1e-8 * (1 + amp))
    assert abs(y[0] - amp * np.cos(w0 * t + phase)) <= 1e-9 * (1 + amp)


@st.composite
def networks(draw):
    """Random scalar or two-state agents on a random connected digraph."""
    g = draw(digraphs(max_n=5))
    assume(reachable_nodes(g))
    seed = draw(seeds())
    rng = np.random.default_rng(seed)
    agents, gains = [], []
    for i in range(1, g.n + 1):
        n = int(rng.integers(1, 3))
        ss = StateSpace(rng.standard_normal((n, n)), rng.standard_normal((n, 1)),
                        rng.standard_normal((1, n)))
        agents.append(Agent(i, ss))
        gains.append(AgentGains(i, rng.standard_normal((1, n)), rng.standard_normal((n, 1)),
                                "lqg", rng.standard_normal((1, 1)), rng.standard_normal((n, 1))))
    root = min(reachable_nodes(g))
    gm = build_matrices(g)
    d = rng.uniform(0.5, 3.0, g.n)
    cs = assemble_collective(agents, gains, gm.adjacency, d, root, ref=ReferenceModel.step())
    return cs, agents, gains, rng


@SETTINGS
@given(networks())
def test_distributed_matches_collective(net):
    cs, agents, gains, rng = net
    sig = {"x": [rng.standard_normal(a.plant.n) for a in agents],
           "x_hat": [rng.standard_normal(a.plant.n) for a in agents],
           "x0": rng.standard_normal(1)}
    for mode in ("fi", "observer", "consensus-observer"):
        coll = collective_protocol_eval(cs, sig, mode)
        loc = [distributed_protocol_eval(cs, i, sig, mode, agents, gains)
               for i in range(1, cs.N + 1)]
        for key in coll:
            np.testing.assert_allclose(np.concatenate([d[key] for d in loc]), coll[key],
                                       atol=1e-12 * (1 + np.abs(coll[key]).max()), rtol=0)


@SETTINGS
@given(networks())
def test_observer_loop_spectrum_is_union(net):
    cs = net[0]
    cl = closed_loop(cs, "observer")
    eF = np.linalg.eigvals(cs.A - cs.B @ cs.M @ cs.F)
    eL = np.linalg.eigvals(cs.A - cs.L @ cs.M_est @ cs.C)
    ev = np.linalg.eigvals(cl.A_cl)
    assert match_spectra(ev, np.concatenate([eF, eL])) <= 1e-6 * max(1.0, np.abs(ev).max())


@SETTINGS
@given(st.integers(2, 60), st.integers(1, 4), st.floats(1e-3, 1.0), seeds())
def test_metrics_consistency(k, n_agents, tol, seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((k, n_agents, 1)) * np.exp(-np.arange(k) / 5.0)[:, None, None]
    tr = Trajectory(np.arange(k) * 0.1, y, np.zeros((k, 1)))
    m = consensus_metrics(tr, tol)
    if m.settled:
        assert m.final_error <= tol
        after = np.abs(y[tr.times >= m.settle_time]).max()
        assert after <= tol
    assert m.pairwise_final <= 2 * np.abs(y[-1]).max() + 1e-15
