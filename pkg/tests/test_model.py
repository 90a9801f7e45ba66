import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagrangian_oracle import oracle_accel
from towersprayer import config as cfgmod
from towersprayer import integrator, model


@pytest.fixture(scope="module")
def p():
    return cfgmod.default_config().physical


def test_params_positive_validation():
    good = cfgmod.default_config().physical
    with pytest.raises(ValueError):
        model.PhysicalParams(**{**good.__dict__, "k1": -1.0})
    with pytest.raises(ValueError):
        model.PhysicalParams(**{**good.__dict__, "m2": 0.0})
    with pytest.raises(ValueError):
        model.PhysicalParams(**{**good.__dict__, "L2": float("nan")})


def test_state_round_trip():
    s = model.State(0.1, -0.2, 0.3, 1.0, -2.0, 3.0)
    assert model.State.from_array(s.as_array()) == s
    with pytest.raises(ValueError):
        model.State.from_array(np.zeros(5))


def test_mass_matrix_reference_values(p):
    # upright configuration: diagonal heave block, symmetric gyro coupling
    sm = model.assemble_matrices(p, model.State(0.0, 0.0, 0.0))
    expected = np.array([[7300.0, 0.0, 0.0],
                         [0.0, 6882.0, 384.0],
                         [0.0, 384.0, 10858.0]])
    assert np.allclose(sm.M, expected, rtol=0, atol=1e-9)


def test_matrix_structure_at_equal_angles(p):
    s = model.State(0.05, 0.21, 0.21, 0.3, -0.2, 0.1)
    sm = model.assemble_matrices(p, s)
    assert sm.M == pytest.approx(sm.M.T)
    # equal left/right damping kills the heave-roll damping coupling
    assert sm.C[0, 1] == 0.0 and sm.C[1, 0] == 0.0
    # centrifugal angle coupling vanishes when phi1 == phi2
    assert sm.N[1, 2] == 0.0 and sm.N[2, 1] == 0.0
    assert sm.N[2, 1] == -sm.N[1, 2]


def test_matrices_accept_plain_arrays(p):
    s = model.State(0.02, 0.1, -0.05, 0.0, 0.4, 0.2)
    a = model.assemble_matrices(p, s)
    b = model.assemble_matrices(p, s.as_array())
    for name in ("M", "N", "C", "K"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_forcing_reference_values(p):
    g_vec, h_vec = model.assemble_forcing(
        p, model.State(0.0, 0.0, 0.0),
        model.ExcitationSample(ye1=0.5, ye2=0.5))
    # symmetric stiffness: gravity only in the heave load
    assert g_vec[0] == pytest.approx(-(p.m1 + p.m2) * p.g_acc)
    assert g_vec[1] == 0.0 and g_vec[2] == 0.0
    assert h_vec[0] == pytest.approx(465000.0)
    assert h_vec[1] == 0.0
    assert h_vec[2] == 0.0


def test_forcing_angle_terms(p):
    phi1, phi2 = 0.2, -0.1
    g_vec, _ = model.assemble_forcing(p, model.State(0.0, phi1, phi2), None)
    sp1, cp1 = math.sin(phi1), math.cos(phi1)
    assert g_vec[1] == pytest.approx(
        p.m2 * p.g_acc * p.L1 * sp1
        - (p.k1 * p.B1 ** 2 + p.k2 * p.B2 ** 2) * sp1 * cp1)
    assert g_vec[2] == pytest.approx(p.m2 * p.g_acc * p.L2 * math.sin(phi2))


def test_static_equilibrium_location(p):
    s = model.static_equilibrium(p)
    assert s.y1 == pytest.approx(
        -(p.m1 + p.m2) * p.g_acc / (p.k1 + p.k2), rel=0, abs=1e-15)
    assert s.y1 == pytest.approx(-0.07701, abs=1e-4)
    assert s.phi1 == 0.0 and s.phi2 == 0.0
    assert np.linalg.norm(model.rhs(p, s)) < 1e-10


def test_equilibrium_scales_with_stiffness(p):
    import dataclasses
    stiff = dataclasses.replace(p, k1=2 * p.k1, k2=2 * p.k2)
    assert model.static_equilibrium(stiff).y1 == pytest.approx(
        model.static_equilibrium(p).y1 / 2)


def test_mean_load_fixed_point(p):
    mu = 0.5
    ystar = mu - (p.m1 + p.m2) * p.g_acc / (p.k1 + p.k2)
    s = np.array([ystar, 0.0, 0.0, 0.0, 0.0, 0.0])
    e = model.ExcitationSample(ye1=mu, ye2=mu)
    assert np.linalg.norm(model.rhs(p, s, e)) < 1e-10


def test_rhs_matches_lagrangian_oracle(p):
    rng = np.random.default_rng(7)
    for _ in range(25):
        q = rng.uniform(-0.3, 0.3, 3)
        v = rng.uniform(-2.0, 2.0, 3)
        exc = rng.uniform(-0.5, 0.5, 4)
        e = model.ExcitationSample(*exc)
        a_model = model.rhs(p, np.concatenate([q, v]), e)[3:]
        a_oracle = oracle_accel(p, q, v, *exc)
        rel = np.linalg.norm(a_model - a_oracle) / max(1.0, np.linalg.norm(a_oracle))
        assert rel < 1e-10


def test_rhs_velocity_passthrough(p):
    s = np.array([0.01, 0.1, -0.2, 0.5, -0.3, 0.7])
    assert np.array_equal(model.rhs(p, s)[:3], s[3:])


@settings(max_examples=60, deadline=None)
@given(phi1=st.floats(-1.2, 1.2), phi2=st.floats(-1.2, 1.2))
def test_mass_matrix_positive_definite(phi1, phi2):
    p = cfgmod.default_config().physical
    sm = model.assemble_matrices(p, model.State(0.0, phi1, phi2))
    assert np.allclose(sm.M, sm.M.T)
    assert np.linalg.eigvalsh(sm.M).min() > 0.0


@settings(max_examples=60, deadline=None)
@given(phi1=st.floats(-1.5, 1.5), phi2=st.floats(-1.5, 1.5))
def test_tower_tip_is_odd_in_angles(phi1, phi2):
    p = cfgmod.default_config().physical
    x2a, _ = model.tower_kinematics(p, model.State(0.0, phi1, phi2))
    x2b, _ = model.tower_kinematics(p, model.State(0.0, -phi1, -phi2))
    assert x2a == pytest.approx(-x2b, abs=1e-12)


def test_tower_tip_reference_points(p):
    x2, y2 = model.tower_kinematics(p, model.State(0.0, 0.0, math.pi / 2))
    assert x2 == pytest.approx(-2.4)
    assert y2 == pytest.approx(p.L1)
    x2, y2 = model.tower_kinematics(p, model.State(-0.077, 0.0, 0.0))
    assert x2 == 0.0
    assert y2 == pytest.approx(-0.077 + p.L1 + p.L2)


def test_singular_mass_matrix_guard(p):
    import dataclasses
    degenerate = dataclasses.replace(p, m1=1e-12, I1=1e-12, I2=1e-12)
    s = np.array([0.0, math.pi / 2, math.pi / 2, 0.0, 0.0, 0.0])
    with pytest.raises(model.SingularMassMatrixError):
        model.rhs(degenerate, s)


def test_energy_functions_consistent(p):
    rng = np.random.default_rng(3)
    states = rng.uniform(-0.4, 0.4, (8, 6))
    exc = rng.uniform(-0.3, 0.3, (8, 4))
    e_vec = model.mechanical_energy(p, states, exc)
    for i in range(8):
        e_scalar = (model.kinetic_energy(p, states[i])
                    + model.potential_energy(
                        p, states[i],
                        model.ExcitationSample(*exc[i])))
        assert e_vec[i] == pytest.approx(e_scalar, rel=1e-12)


def test_free_decay_dissipates_energy(p):
    rhs_fn = model.make_rhs(p)
    y0 = np.array([0.0, 0.12, -0.08, 0.0, 0.0, 0.0])
    cfg = integrator.IntegratorConfig(tf=5.0, dt_out=0.01)
    traj = integrator.integrate(rhs_fn, y0, None, cfg)
    E = integrator.energy_audit(traj, p)
    assert np.all(np.diff(E) <= 1e-9 * max(1.0, abs(E[0])))
    assert E[-1] < E[0]


def test_make_rhs_carries_parameters(p):
    f = model.make_rhs(p)
    assert f.params is p
    assert np.array_equal(f.pvec, p.as_vector())
    s = np.array([0.01, 0.05, -0.02, 0.1, 0.0, 0.2])
    assert np.array_equal(f(0.0, s, None), model.rhs(p, s, None))
