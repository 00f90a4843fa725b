from __future__ import annotations

import numpy as np
import pytest

from dissipative import problems, presets
from dissipative.core import EnergyModel, FieldSpec, State, dissipation, energy, qstar_pairing, verify_structure
from dissipative.errors import AdmissibilityError, ArgumentError
from dissipative.fem1d import FESpace, Kind, ProductSpace, build_uniform_mesh, gauss

import oracles

ALL_PROBLEMS = ["heat", "pme", "fokker_planck", "cross_diffusion", "maxwell1d", "gas", "gradient"]


def _setup(kind, nx=8, **overrides):
    model = presets.default_model(kind, **overrides)
    space = model.build_spaces(model.build_mesh(nx))
    return model, space


# --- energy -------------------------------------------------------------------------

def test_energy_examples():
    model, space = _setup("heat")
    assert energy(model, space, np.ones(space.ndofs)) == 0.0
    model, space = _setup("pme", m=2.0)
    assert energy(model, space, np.full(space.ndofs, 2.0)) == pytest.approx(4.0, abs=1e-14)
    model, space = _setup("gas", gamma=2.0)
    u = space.interpolate(lambda x: 1.0 + 0 * x, lambda x: 0 * x)
    assert energy(model, space, u) == pytest.approx(0.0, abs=1e-15)


def test_energy_accepts_state_and_batches():
    model, space = _setup("pme", m=2.0)
    u = np.full(space.ndofs, 2.0)
    assert energy(model, space, State(space, u, 0.0)) == pytest.approx(4.0)
    batch = np.stack([u, 0.5 * u])
    np.testing.assert_allclose(energy(model, space, batch), [4.0, 1.0], atol=1e-14)


def test_energy_reports_inadmissible_location():
    model, space = _setup("heat", nx=4)
    u = space.interpolate(lambda x: 1.0 - 2.0 * x)
    with pytest.raises(AdmissibilityError) as info:
        energy(model, space, u)
    assert info.value.x >= 0.25
    assert info.value.values[0] <= 0


# --- dissipation --------------------------------------------------------------------------

def test_dissipation_vanishes_for_constant_heat_state():
    model, space = _setup("heat")
    assert dissipation(model, space, np.full(space.ndofs, 3.0)) == 0.0


def test_maxwell_dissipation_integrand():
    # sigma = 1 and E = 2: -a_form with test slot (E, H) is sigma E^2 = 4 pointwise
    model = problems.make_maxwell1d(sigma=1.0)
    U = np.array([[2.0], [0.7]])
    dU = np.array([[0.0], [0.0]])
    assert -model.a_form(U, dU, U, dU, np.array([0.5]))[0] == pytest.approx(4.0)
    mesh = build_uniform_mesh(1.0, 1)
    assert oracles.composite(lambda x: -model.a_form(U + 0 * x, dU + 0 * x, U + 0 * x, dU + 0 * x, x),
                             mesh.nodes) == pytest.approx(4.0)


def test_maxwell_dissipation_with_pinned_ends():
    # E = 2 at every free node; the two boundary elements ramp down to 0
    model = problems.make_maxwell1d(sigma=1.0)
    space = model.build_spaces(model.build_mesh(8))
    u = space.interpolate(lambda x: 2.0 + 0 * x, lambda x: 0.3 + 0 * x)
    h = 1.0 / 8
    assert dissipation(model, space, u) == pytest.approx(4.0 - 16.0 * h / 3.0, abs=1e-13)


def test_pme_dissipation_against_dense_oracle():
    model, space = _setup("pme", m=2.0)
    nodes = space.mesh.nodes
    u = space.interpolate(lambda x: 1.0 + 0.5 * np.sin(np.pi * x))

    def integrand(x):
        rho, g = oracles.p1_eval(nodes, u, x)
        return rho * (2.0 * g) ** 2  # rho |m/(m-1) (rho^{m-1})'|^2 with m = 2

    expected = oracles.composite(integrand, nodes, 50)
    assert expected == pytest.approx(5.9058378860725185, rel=1e-14)
    assert dissipation(model, space, u) == pytest.approx(expected, rel=1e-12)


# --- structure ------------------------------------------------------------------------------

def test_structure_heat_example():
    model, space = _setup("heat")
    rep = verify_structure(model, space, np.full(space.ndofs, 2.0), np.ones(space.ndofs))
    assert rep.derivative_fd == pytest.approx(-0.5, abs=1e-9)
    assert rep.pairing == pytest.approx(-0.5, abs=1e-14)
    assert rep.passed


@pytest.mark.parametrize("u, v", [(0.3, -1.2), (2.0, 0.5), (-1.0, 1.0)])
def test_structure_quadratic_gradient_system(u, v):
    model = presets.gradient_model()
    space = model.build_spaces(model.build_mesh())
    rep = verify_structure(model, space, [u], [v])
    assert rep.pairing == pytest.approx(u * v, rel=1e-12)
    assert rep.derivative_fd == pytest.approx(u * v, rel=1e-9)


def test_structure_cross_diffusion_zero_state():
    model, space = _setup("cross_diffusion", nx=4)
    u = np.zeros(space.ndofs)
    v = space.join([np.ones(5), np.zeros(5)])
    rep = verify_structure(model, space, u, v)
    assert rep.pairing == 0.0
    assert rep.derivative_fd == pytest.approx(0.0, abs=1e-12)


def test_structure_shrinks_step_near_boundary():
    model, space = _setup("heat", nx=2)
    u = np.full(space.ndofs, 1e-5)
    rep = verify_structure(model, space, u, -np.ones(space.ndofs), h=4e-5)
    assert rep.h == pytest.approx(5e-6)


def test_structure_rejects_nonpositive_step():
    model, space = _setup("heat", nx=2)
    with pytest.raises(ArgumentError):
        verify_structure(model, space, np.ones(3), np.ones(3), h=0.0)


def test_structure_detects_wrong_factorization():
    # energy u^2/2 but Q claims 2: the check must flag it
    model = EnergyModel(
        name="wrong",
        fields=(FieldSpec("u"),),
        energy_density=lambda U, dU, x: 0.5 * U[0] ** 2,
        qstar_form=lambda U, dU, R, dR, T, dT, x: 2.0 * R[0] * T[0],
        a_form=lambda U, dU, T, dT, x: -dU[0] * dT[0],
    )
    space = model.build_spaces(model.build_mesh(4))
    assert not verify_structure(model, space, np.ones(5), np.ones(5)).passed


@pytest.mark.parametrize("kind", ALL_PROBLEMS)
def test_structure_at_random_states(kind):
    model, space = _setup(kind, nx=8)
    rng = np.random.default_rng(42)
    sampler = presets.preset(kind).sampler
    for _ in range(10):
        rep = verify_structure(model, space, sampler(space, rng), rng.uniform(-1, 1, space.ndofs), h=1e-5)
        assert rep.discrepancy <= 1e-6, rep


@pytest.mark.parametrize("kind", ALL_PROBLEMS)
def test_dissipation_nonnegative_at_random_states(kind):
    model, space = _setup(kind, nx=8)
    rng = np.random.default_rng(7)
    sampler = presets.preset(kind).sampler
    for _ in range(20):
        assert dissipation(model, space, sampler(space, rng)) >= -1e-10


def test_qstar_pairing_is_bilinear_in_rate_and_test():
    model, space = _setup("gas")
    rng = np.random.default_rng(3)
    u = presets.preset("gas").sampler(space, rng)
    a, b, t = (rng.normal(size=space.ndofs) for _ in range(3))
    lhs = qstar_pairing(model, space, u, 2.0 * a - b, t)
    rhs = 2.0 * qstar_pairing(model, space, u, a, t) - qstar_pairing(model, space, u, b, t)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


# --- refinement -----------------------------------------------------------------------------

def _inject(coarse: ProductSpace, fine: ProductSpace, u):
    """Exact injection of a coarse FE function into the twice-refined space."""
    parts = []
    hc = coarse.mesh.h
    hf = fine.mesh.h
    for sc, sf, c in zip(coarse, fine, coarse.split(u)):
        local = sc.local_coefficients(c)  # (ne, nlocal)
        mids = 0.5 * (fine.mesh.nodes[:-1] + fine.mesh.nodes[1:])
        owner = (mids // hc).astype(int)
        xi = (mids - coarse.mesh.nodes[owner]) / hc
        phi, dphi = sc.basis(xi)
        val = np.einsum("ea,ae->e", local[owner], phi)
        slope = np.einsum("ea,ae->e", local[owner], dphi)
        if sf.kind is Kind.P0:
            parts.append(val)
        elif sf.kind is Kind.P1_DISCONTINUOUS:
            parts.append(np.stack([val - 0.5 * hf * slope, val + 0.5 * hf * slope], axis=1).ravel())
        else:
            full = np.concatenate([val - 0.5 * hf * slope, [val[-1] + 0.5 * hf * slope[-1]]])
            lo = 1 if sf.pin_left else 0
            hi = len(full) - 1 if sf.pin_right else len(full)
            parts.append(full[lo:hi])
    return fine.join(parts)


@pytest.mark.parametrize("kind, overrides", [
    ("pme", {"m": 2.0}),
    ("pme", {"m": 3.0}),
    ("fokker_planck", {}),
    ("maxwell1d", {}),
])
def test_energy_invariant_under_refinement(kind, overrides):
    # polynomial densities of degree <= 5 are integrated exactly by 3-point Gauss
    model = presets.default_model(kind, **overrides)
    coarse = model.build_spaces(model.build_mesh(6))
    fine = model.build_spaces(model.build_mesh(12))
    rng = np.random.default_rng(11)
    u = presets.preset(kind).sampler(coarse, rng)
    e_coarse = energy(model, coarse, u)
    e_fine = energy(model, fine, _inject(coarse, fine, u))
    assert abs(e_fine - e_coarse) <= 1e-12 * max(1.0, abs(e_coarse))


def test_injection_helper_is_exact():
    from dissipative.fem1d import eval_fe
    mesh_c, mesh_f = build_uniform_mesh(1.0, 3), build_uniform_mesh(1.0, 6)
    for kind, pins in [(Kind.P1_CONTINUOUS, (True, True)), (Kind.P1_DISCONTINUOUS, (False, False)),
                       (Kind.P0, (False, False))]:
        coarse = ProductSpace([FESpace(mesh_c, kind, *pins)])
        fine = ProductSpace([FESpace(mesh_f, kind, *pins)])
        u = np.arange(1.0, coarse.ndofs + 1.0) ** 2
        uf = _inject(coarse, fine, u)
        for x in np.linspace(0.01, 0.99, 23):
            assert eval_fe(fine[0], uf, x) == pytest.approx(eval_fe(coarse[0], u, x), abs=1e-13)
