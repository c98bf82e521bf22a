import numpy as np
import pytest

from irsrelay.channels import LargeScaleParams, Topology, draw_channels, place_users
from irsrelay.conic import SolveStatus, SolverOptions, solve
from irsrelay.hermitian import complex_from_embedding
from irsrelay.sca import u_value, u3_value, v_value
from irsrelay.subproblems import (
    NoFeasibleCandidate,
    _bs_data,
    _irs_data,
    _outer,
    _relay_data,
    bs_local_points,
    build_bs_sdp,
    build_irs_sdp,
    build_relay_sdp,
    irs_local_points,
    optimize_bs,
    optimize_irs,
    optimize_relay,
    randomize_rank_one,
    relay_local_points,
)
from irsrelay.system import (
    BeamformingState,
    SystemParams,
    effective_channels,
    relay_mf_sinr,
    sinr_report,
)
from irsrelay.ao import AOConfig, Scheme, initialize_state

OPTS = SolverOptions()


def make_setup(M=4, L=2, N=8, K=2, seed=1, gamma_r_th=10.0):
    topo = Topology().with_users(place_users((0.0, 200.0), 10.0, K, seed))
    ch = draw_channels(topo, LargeScaleParams(), dict(M=M, L=L, N=N, K=K), seed)
    params = SystemParams.for_users(K, gamma_r_th=gamma_r_th)
    state = initialize_state(ch, params, Scheme.PROPOSED, np.random.default_rng(seed))
    return ch, params, state


def lifted_bs_objective(G_lift, hpp, Hpp, c1):
    """True lifted objective of the BS subproblem at exact slack values."""
    z1, _ = bs_local_points(hpp, Hpp, G_lift)
    return sum(u_value(z.s, z.i, c) for z, c in zip(z1, c1))


def test_bs_anchor_is_feasible_and_ascends():
    ch, params, state = make_setup()
    hpp, Hpp = _bs_data(ch, state.theta, params)
    G_lift = [_outer(state.G[:, k]) / params.p_bs_max for k in range(ch.K)]
    c1 = np.ones(ch.K)
    gamma_th = 0.1  # low threshold keeps the anchor strictly feasible
    anchor = lifted_bs_objective(G_lift, hpp, Hpp, c1)
    z1, zR = bs_local_points(hpp, Hpp, G_lift)
    problem, handles = build_bs_sdp(0, hpp, Hpp, G_lift, c1, z1, zR, gamma_th)
    sol = solve(problem, OPTS)
    assert sol.status is SolveStatus.OPTIMAL
    # Incumbent is feasible for the surrogate, so the optimum dominates it.
    assert sol.objective_value >= anchor - 1e-6


def test_bs_inner_sweep_monotone_surrogate():
    ch, params, state = make_setup(seed=3)
    hpp, Hpp = _bs_data(ch, state.theta, params)
    G_lift = [_outer(state.G[:, k]) / params.p_bs_max for k in range(ch.K)]
    c1 = np.ones(ch.K)
    gamma_th = 0.1
    values = []
    for _ in range(2):
        for k_active in range(ch.K):
            z1, zR = bs_local_points(hpp, Hpp, G_lift)
            problem, handles = build_bs_sdp(k_active, hpp, Hpp, G_lift, c1, z1, zR, gamma_th)
            sol = solve(problem, OPTS)
            assert sol.status is SolveStatus.OPTIMAL
            G_lift[k_active] = complex_from_embedding(sol.psd_values[handles.g_block])
            values.append(sol.objective_value)
    assert all(b >= a - 1e-6 for a, b in zip(values, values[1:]))


def test_bs_surrogate_soundness():
    # True lifted objective at the optimum dominates the surrogate value.
    ch, params, state = make_setup(seed=5)
    hpp, Hpp = _bs_data(ch, state.theta, params)
    G_lift = [_outer(state.G[:, k]) / params.p_bs_max for k in range(ch.K)]
    c1 = 1.0 + np.linspace(0.0, 1.0, ch.K)
    z1, zR = bs_local_points(hpp, Hpp, G_lift)
    problem, handles = build_bs_sdp(0, hpp, Hpp, G_lift, c1, z1, zR, 0.1)
    sol = solve(problem, OPTS)
    assert sol.status is SolveStatus.OPTIMAL
    G_lift[0] = complex_from_embedding(sol.psd_values[handles.g_block])
    assert lifted_bs_objective(G_lift, hpp, Hpp, c1) >= sol.objective_value - 1e-6


def test_bs_scalar_closed_form_full_power():
    # K=1, single antennas, theta=0: the SCA iteration converges to transmit
    # at full power (single solves stay conservative because the linearized
    # relay-SINR row underestimates far from the anchor).
    ch, params, _ = make_setup(M=1, L=1, N=1, K=1, seed=2, gamma_r_th=1e-6)
    theta = np.zeros(1)
    g0 = 0.3 * np.sqrt(params.p_bs_max)  # deliberately weak incumbent
    state = BeamformingState(np.array([[g0 + 0j]]), np.array([[np.sqrt(params.p_r_max) + 0j]]), theta)
    cfg = AOConfig(sca_inner_iters=6, sca_tol=1e-9, randomization_samples=20)
    out = optimize_bs(ch, state, params, cfg, params.gamma_r_th, np.random.default_rng(0),
                      objective_fn=lambda G: sinr_report(ch, BeamformingState(G, state.F, theta), params).sum_rate,
                      relay_sinr_fn=lambda G: relay_mf_sinr(ch, G, theta, params))
    assert out.update is not None
    assert np.sum(np.abs(out.update) ** 2) / params.p_bs_max == pytest.approx(1.0, abs=1e-5)


def test_relay_scalar_closed_form_full_power():
    ch, params, _ = make_setup(M=1, L=1, N=1, K=1, seed=4)
    theta = np.zeros(1)
    f0 = 0.4 * np.sqrt(params.p_r_max)
    state = BeamformingState(np.array([[np.sqrt(params.p_bs_max) + 0j]]), np.array([[f0 + 0j]]), theta)
    hpp_r = _relay_data(ch, theta, params)
    F_lift = [_outer(state.F[:, 0]) / params.p_r_max]
    z2 = relay_local_points(hpp_r, F_lift)
    problem, handles = build_relay_sdp(hpp_r, np.ones(1), z2)
    sol = solve(problem, OPTS)
    assert sol.status is SolveStatus.OPTIMAL
    F_opt = complex_from_embedding(sol.psd_values[handles.f_blocks[0]])
    assert np.trace(F_opt).real == pytest.approx(1.0, abs=1e-5)


def test_relay_budget_monotone():
    # Doubling the relay budget never decreases the surrogate optimum.
    ch, params, state = make_setup(seed=6)
    vals = []
    for p_r in (params.p_r_max, 2 * params.p_r_max):
        p = SystemParams.for_users(ch.K, p_r_max=p_r)
        hpp_r = _relay_data(ch, state.theta, p)
        F_lift = [_outer(state.F[:, k] * np.sqrt(p_r / params.p_r_max)) / p_r for k in range(ch.K)]
        z2 = relay_local_points(hpp_r, F_lift)
        problem, _ = build_relay_sdp(hpp_r, np.ones(ch.K), z2)
        sol = solve(problem, OPTS)
        assert sol.status is SolveStatus.OPTIMAL
        vals.append(sol.objective_value)
    assert vals[1] >= vals[0] - 1e-6


def test_relay_anchor_feasible():
    ch, params, state = make_setup(seed=7)
    hpp_r = _relay_data(ch, state.theta, params)
    F_lift = [_outer(state.F[:, k]) / params.p_r_max for k in range(ch.K)]
    z2 = relay_local_points(hpp_r, F_lift)
    anchor = sum(u_value(z.s, z.i, 1.0) for z in z2)
    problem, _ = build_relay_sdp(hpp_r, np.ones(ch.K), z2)
    sol = solve(problem, OPTS)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective_value >= anchor - 1e-6


def test_irs_anchor_feasible_and_diag_bounds():
    ch, params, state = make_setup(N=6, seed=8, gamma_r_th=1e-6)
    data = _irs_data(ch, state.G, state.F, params, True)
    phi = np.concatenate([state.theta, [1.0]]).conj()
    Phi = _outer(phi)
    z1, z2, zR = irs_local_points(data, Phi)
    anchor = sum(u3_value(a.s, a.i, b.s, b.i) for a, b in zip(z1, z2))
    problem, handles = build_irs_sdp(data, z1, z2, zR, 1e-6, ch.N)
    sol = solve(problem, OPTS)
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.objective_value >= anchor - 1e-6
    Phi_opt = complex_from_embedding(sol.psd_values[handles.phi_block])
    diag = np.real(np.diag(Phi_opt))
    assert np.all(diag[:-1] <= 1.0 + 1e-6)
    assert diag[-1] == pytest.approx(1.0, abs=1e-6)


def test_irs_identity_phi_is_feasible_point():
    # Unit diagonal, zero off-diagonal Phi is PSD and satisfies the lifted
    # reflection rows.
    n = 5
    Phi = np.eye(n + 1, dtype=complex)
    assert np.linalg.eigvalsh(Phi)[0] >= 0
    assert np.all(np.real(np.diag(Phi))[:-1] <= 1.0)
    assert np.real(Phi[-1, -1]) == pytest.approx(1.0)


def test_randomize_rank_one_exact_input():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    X = _outer(x)
    got = randomize_rank_one(X, "bs", lambda v: True, n_samples=10, rng=0)
    assert abs(np.vdot(got, x)) == pytest.approx(np.linalg.norm(x) ** 2, rel=1e-9)


def test_randomize_rank_one_irs_pivot_normalization():
    rng = np.random.default_rng(1)
    theta = np.exp(1j * rng.uniform(0, 2 * np.pi, 5))
    chi = 0.9
    phi = np.concatenate([theta, [np.exp(1j * chi)]])
    got = randomize_rank_one(_outer(phi), "irs", lambda v: True, n_samples=10, rng=0)
    # phi / phi[-1] has last entry 1; theta entries are the conjugates of the
    # remaining lifted coordinates.
    expect = (phi / phi[-1])[:-1].conj()
    assert np.allclose(got, expect, atol=1e-9)
    assert np.max(np.abs(got)) <= 1.0 + 1e-9


def test_randomize_rank_two_beats_deterministic():
    # With a rank-deficient tie, sampling must do at least as well as the top
    # eigenvector for any linear scoring.
    X = np.diag([1.0, 1.0]).astype(complex)
    rng = np.random.default_rng(3)
    c = rng.standard_normal(2) + 1j * rng.standard_normal(2)

    def score(v):
        return float(np.abs(np.vdot(c, v)) ** 2)

    w, V = np.linalg.eigh(X)
    det = np.sqrt(w[-1]) * V[:, -1]
    got = randomize_rank_one(X, "bs", lambda v: True, n_samples=200, rng=4,
                             power_share=1.0, objective=score)
    assert score(got) >= score(det) - 1e-12


def test_randomize_rejects_all_infeasible():
    X = np.eye(3, dtype=complex)
    with pytest.raises(NoFeasibleCandidate):
        randomize_rank_one(X, "bs", lambda v: False, n_samples=5, rng=0, power_share=1.0)


def test_optimize_irs_respects_modulus():
    ch, params, state = make_setup(N=6, seed=9, gamma_r_th=1e-6)
    cfg = AOConfig(sca_inner_iters=2, randomization_samples=30)
    out = optimize_irs(ch, state, params, cfg, params.gamma_r_th, np.random.default_rng(0),
                       objective_fn=lambda t: sinr_report(ch, BeamformingState(state.G, state.F, t), params).sum_rate)
    assert out.update is not None
    assert np.max(np.abs(out.update)) <= 1.0 + 1e-9


def test_optimize_irs_grid_oracle_small():
    # Scalar system: SDR-recovered reflection vs exhaustive phase grid.
    for seed in (11, 12, 13):
        ch, params, _ = make_setup(M=1, L=1, N=1, K=1, seed=seed, gamma_r_th=1e-6)
        rng = np.random.default_rng(seed)
        state = initialize_state(ch, params, Scheme.PROPOSED, rng)
        cfg = AOConfig(sca_inner_iters=4, randomization_samples=100)

        def true_rate(theta):
            return sinr_report(ch, BeamformingState(state.G, state.F, theta), params).sum_rate

        out = optimize_irs(ch, state, params, cfg, params.gamma_r_th, rng, objective_fn=true_rate,
                           relay_sinr_fn=lambda t: relay_mf_sinr(ch, state.G, t, params))
        assert out.update is not None
        grid = np.exp(1j * np.deg2rad(np.arange(0.0, 360.0, 0.5)))
        best = max(true_rate(np.array([g])) for g in grid)
        assert true_rate(out.update) >= best - 0.02


def test_optimize_bs_improves_subproblem_objective():
    ch, params, state = make_setup(seed=14, gamma_r_th=0.1)
    cfg = AOConfig(sca_inner_iters=2, randomization_samples=60)

    def obj(G):
        return sinr_report(ch, BeamformingState(G, state.F, state.theta), params).sum_rate

    out = optimize_bs(ch, state, params, cfg, params.gamma_r_th, np.random.default_rng(1),
                      objective_fn=obj, relay_sinr_fn=lambda G: relay_mf_sinr(ch, G, state.theta, params))
    assert out.update is not None
    assert np.sum(np.abs(out.update) ** 2) <= params.p_bs_max * (1 + 1e-6)
    assert np.all(relay_mf_sinr(ch, out.update, state.theta, params) >= params.gamma_r_th - 1e-4)


def test_independent_irs_drops_phase2_rows():
    ch, params, state = make_setup(N=6, seed=15, gamma_r_th=1e-6)
    data = _irs_data(ch, state.G, state.F, params, False)
    assert data.b is None and data.c2_const is not None
    phi = np.concatenate([state.theta, [1.0]]).conj()
    z1, z2, zR = irs_local_points(data, _outer(phi))
    assert z2 is None
    problem, handles = build_irs_sdp(data, z1, z2, zR, 1e-6, ch.N)
    sol = solve(problem, OPTS)
    assert sol.status is SolveStatus.OPTIMAL
    assert handles.s2 is None
