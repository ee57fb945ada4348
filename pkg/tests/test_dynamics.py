import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spinrotor.dynamics import (
    CSV_COLUMNS,
    CoordinateSingularityError,
    IntegrationError,
    IntegratorSettings,
    _params,
    _rhs_J,
    euler_angle_rates,
    euler_rhs,
    free_symmetric_top,
    integrate_hard_magnet,
    sample_times,
)
from spinrotor.rotor import InertiaSpec, Orientation, RotorState, euler_to_orientation, quat_to_matrix

GENERIC = InertiaSpec(1.3, 1.0, 0.8)
PROLATE = InertiaSpec(1.0, 1.0, 0.6)

vec = st.lists(st.floats(-2, 2), min_size=3, max_size=3)


@given(vec, vec)
def test_compiled_rhs_matches_component_formula(J, S):
    J = np.array(J)
    if np.linalg.norm(J) < 1e-3:
        J = J + 1.0
    p, Jref = _params(GENERIC, np.array(S), J, None, False)
    out = np.empty(3)
    _rhs_J(0.0, J / Jref, p, out)
    assert np.allclose(out * Jref, euler_rhs(J, S, GENERIC), rtol=1e-12, atol=1e-12)


def test_rhs_conserves_norm_and_energy_pointwise():
    rng = np.random.default_rng(3)
    for _ in range(20):
        J, S = rng.normal(size=3), rng.normal(size=3)
        dJ = euler_rhs(J, S, GENERIC)
        assert J @ dJ == pytest.approx(0, abs=1e-12)
        # d/dt sum (J_k - S_k)^2 / 2 I_k = omega . dJ
        assert ((J - S) / GENERIC.moments) @ dJ == pytest.approx(0, abs=1e-12)


def test_free_top_closed_form_solves_euler_equations():
    q0 = euler_to_orientation(0.3, 0.7, -0.2).q
    J0 = np.array([0.2, 0.5, 0.9])
    t = np.array([0.37])
    h = 1e-5
    J, R = free_symmetric_top(J0, q0, PROLATE, np.array([t[0] - h, t[0], t[0] + h]))
    dJ = (J[2] - J[0]) / (2 * h)
    assert np.allclose(dJ, euler_rhs(J[1], np.zeros(3), PROLATE), atol=1e-8)
    # dR/dt = R [omega]_x with body angular velocity omega
    w = J[1] / PROLATE.moments
    wx = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    assert np.allclose((R[2] - R[0]) / (2 * h), R[1] @ wx, atol=1e-8)
    # space-fixed J is constant
    assert np.allclose(R[1] @ J[1], quat_to_matrix(q0) @ J0, atol=1e-12)


def test_free_top_numeric_matches_closed_form():
    q0 = euler_to_orientation(0.3, 0.7, -0.2).q
    J0 = np.array([0.2, 0.5, 0.9])
    period = 2 * np.pi * PROLATE.I1 / np.linalg.norm(J0)
    T = 50 * period
    tr = integrate_hard_magnet(RotorState(Orientation(q0), J0), np.zeros(3), PROLATE, (0, T),
                               IntegratorSettings(sample_interval=period / 7))
    J, R = free_symmetric_top(J0, q0, PROLATE, tr.times)
    Jn = np.linalg.norm(J0)
    assert np.max(np.abs(tr.J_body - J)) < 1e-9 * Jn
    Rn = np.array([quat_to_matrix(q) for q in tr.q])
    assert np.max(np.abs(Rn - R)) < 1e-8


@pytest.mark.parametrize("project", [True, False])
def test_invariants_generic_rotor(project):
    S = np.array([0.05, -0.1, 0.07])
    state = RotorState(euler_to_orientation(0.1, 1.1, 0.4), np.array([0.3, 1.0, -0.2]))
    s = IntegratorSettings(project_invariants=project, sample_interval=1.0)
    tr = integrate_hard_magnet(state, S, GENERIC, (0, 2000.0), s)
    tol = 1e-12 if project else 1e-8
    assert np.max(np.abs(tr.J / tr.J[0] - 1)) < tol
    assert np.max(np.abs(tr.energy / tr.energy[0] - 1)) < tol
    Js = tr.J_space
    assert np.max(np.linalg.norm(Js - Js[0], axis=1)) / tr.J[0] < (1e-11 if project else 1e-7)


def test_backward_integration_returns_to_start():
    S = np.array([0.0, 0.2, 0.0])
    state = RotorState(euler_to_orientation(0.5, 1.2, 0.3), np.array([0.1, 1.0, 0.3]))
    fwd = integrate_hard_magnet(state, S, GENERIC, (0, 30.0))
    back = integrate_hard_magnet(fwd.states[-1], S, GENERIC, (30.0, 0.0))
    assert back.times[-1] == 0.0
    assert np.allclose(back.J_body[-1], state.J_body, atol=1e-9)
    assert np.allclose(np.abs(back.q[-1] @ state.orientation.q), 1.0, atol=1e-9)


def test_spin_along_spin_axis_is_steady():
    # J parallel to n2 and S parallel to n2: omega parallel to J, no torque
    state = RotorState(Orientation.identity(), np.array([0.0, 1.0, 0.0]))
    tr = integrate_hard_magnet(state, [0, 0.3, 0], GENERIC, (0, 10.0))
    assert np.allclose(tr.J_body, [0, 1, 0], atol=1e-14)


def test_euler_angle_rates_match_trajectory():
    """Finite differences of a sampled trajectory reproduce the closed-form rates."""
    inertia = InertiaSpec(1.0, 1.0, 0.7)
    J, S2 = 1.0, 0.05
    a0, b0, g0 = 0.2, 1.0, 0.6
    state = RotorState.from_euler(J, a0, b0, g0)
    h = 1e-5
    tr = integrate_hard_magnet(state, [0, S2, 0], inertia, (-h, h), t_eval=[-h, 0.0, h],
                               settings=IntegratorSettings(rel_tol=1e-13, abs_tol=1e-15))
    angles = np.array([s.orientation.euler() for s in tr.states])
    fd = (angles[2] - angles[0]) / (2 * h)
    assert np.allclose(fd, euler_angle_rates(a0, b0, g0, J, S2, 1.0, 0.7), rtol=1e-5, atol=1e-6)


def test_euler_angle_rates_singular():
    with pytest.raises(CoordinateSingularityError):
        euler_angle_rates(0, 0, 0, 1, 0.1, 1, 0.5)


def test_step_budget_raises_with_last_time():
    state = RotorState(Orientation.identity(), np.array([0.3, 1.0, 0.2]))
    with pytest.raises(IntegrationError) as err:
        integrate_hard_magnet(state, np.zeros(3), GENERIC, (0, 1000.0), IntegratorSettings(max_steps=50))
    assert 0 < err.value.last_good_time < 1000.0


@pytest.mark.parametrize("kw", [{"rel_tol": 0}, {"rel_tol": 0.1}, {"abs_tol": -1}, {"max_step": 0},
                                {"sample_interval": 0}])
def test_settings_validation(kw):
    with pytest.raises(ValueError):
        IntegratorSettings(**kw)


@settings(max_examples=30)
@given(st.floats(-5, 5), st.floats(0.01, 10), st.floats(1e-3, 1))
def test_sample_times_grid(t0, span, dt):
    t = sample_times(t0, t0 + span, dt)
    assert t[0] == t0 and t[-1] == t0 + span
    assert np.all(np.diff(t) > 0)
    assert np.all(np.diff(t)[:-1] == pytest.approx(dt))


def test_csv_layout():
    state = RotorState(Orientation.identity(), np.array([0.0, 1.0, 0.1]))
    tr = integrate_hard_magnet(state, [0, 0.1, 0], PROLATE, (0, 1.0), IntegratorSettings(sample_interval=0.25))
    lines = tr.to_csv().splitlines()
    assert lines[0].split(",") == list(CSV_COLUMNS)
    assert len(lines) == 6
    row = dict(zip(CSV_COLUMNS, map(float, lines[1].split(","))))
    assert row["align_proxy"] == pytest.approx(1 / np.sqrt(1.01))
    assert row["align_geom"] == pytest.approx(1.0)
