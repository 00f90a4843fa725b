"""Concrete dissipative problems written in weighted variational form.

Each constructor returns an :class:`~dissipative.core.EnergyModel` whose
pointwise forms realize ``<Q(u)* du/dt, v> = <A(u), v>`` for that problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .core import EnergyModel, FieldSpec
from .errors import ArgumentError, NewtonDivergence
from .fem1d import Kind, Mesh1D, Quadrature, gauss, integrate

EPS_POS = 1e-10


def _positive(U):
    return U[0] > EPS_POS


# --- heat equation with logarithmic entropy -----------------------------------

def make_heat_log() -> EnergyModel:
    """Heat equation ``u_t = u_xx`` (Neumann) weighted by ``-u^-2``.

    Energy ``-int log u``; ``Q(u) v = -u^-2 v``; and
    ``<A(u), v> = -<u (1/u)', u (v/u^2)'>``.
    """

    def energy_density(U, dU, x):
        return -np.log(U[0])

    def qstar_form(U, dU, R, dR, T, dT, x):
        return -R[0] * T[0] / U[0] ** 2

    def a_form(U, dU, T, dT, x):
        u, g = U[0], dU[0]
        return g * dT[0] / u ** 2 - 2.0 * g ** 2 * T[0] / u ** 3

    return EnergyModel(
        name="heat",
        fields=(FieldSpec("u"),),
        energy_density=energy_density,
        qstar_form=qstar_form,
        a_form=a_form,
        admissible=_positive,
    )


# --- porous medium equation ----------------------------------------------------

def make_porous_medium(m: float) -> EnergyModel:
    """Porous medium equation ``rho_t = (rho^m)_xx`` with energy ``int rho^m/(m-1)``."""
    if not np.isfinite(m) or m <= 1:
        raise ArgumentError(f"porous medium exponent must satisfy m > 1, got {m!r}")
    m = float(m)
    c = m / (m - 1.0)

    def energy_density(U, dU, x):
        return U[0] ** m / (m - 1.0)

    def qstar_form(U, dU, R, dR, T, dT, x):
        return c * U[0] ** (m - 2.0) * R[0] * T[0]

    def a_form(U, dU, T, dT, x):
        # -(rho c (rho^{m-1})', c (rho^{m-2} v)')
        r, g = U[0], dU[0]
        flux = c * (m - 1.0) * r ** (m - 1.0) * g
        return -flux * c * ((m - 2.0) * r ** (m - 3.0) * g * T[0] + r ** (m - 2.0) * dT[0])

    return EnergyModel(
        name="pme",
        fields=(FieldSpec("rho"),),
        energy_density=energy_density,
        qstar_form=qstar_form,
        a_form=a_form,
        admissible=_positive,
        params={"m": m},
    )


# --- Fokker-Planck equation ------------------------------------------------------

def _zero_potential(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def normalization_constant(V: Callable, mass: float, mesh: Mesh1D | None = None,
                           L: float = 1.0, quad: Quadrature | None = None) -> float:
    """Constant ``c`` with ``int c exp(-V) dx = mass``.

    Uses the mesh quadrature when a mesh is given so that discrete mass and
    discrete normalization agree; otherwise a fine composite Gauss rule.
    """
    if mesh is None:
        from .fem1d import build_uniform_mesh
        mesh, quad = build_uniform_mesh(L, 64), gauss(20)
    quad = quad or gauss(3)
    return mass / integrate(mesh, lambda x: np.exp(-V(x)), quad)


def make_fokker_planck(V: Callable | None = None, mass: float = 1.0, *, mesh: Mesh1D | None = None,
                       L: float = 1.0, quad: Quadrature | None = None) -> EnergyModel:
    """Fokker-Planck equation in the relative density ``u = rho / rho_inf``.

    ``rho_inf = c exp(-V)`` with ``c`` chosen so that ``int rho_inf = mass``.
    """
    if not np.isfinite(mass) or mass <= 0:
        raise ArgumentError(f"mass must be positive, got {mass!r}")
    V = V or _zero_potential
    c = normalization_constant(V, mass, mesh, L, quad)

    def rho_inf(x):
        return c * np.exp(-V(x))

    def energy_density(U, dU, x):
        return 0.5 * U[0] ** 2 * rho_inf(x)

    def qstar_form(U, dU, R, dR, T, dT, x):
        return rho_inf(x) * R[0] * T[0]

    def a_form(U, dU, T, dT, x):
        return -rho_inf(x) * dU[0] * dT[0]

    return EnergyModel(
        name="fokker_planck",
        fields=(FieldSpec("u"),),
        energy_density=energy_density,
        qstar_form=qstar_form,
        a_form=a_form,
        params={"c": c, "mass": float(mass), "V": V, "rho_inf": rho_inf},
    )


# --- cross-diffusion system in entropy variables ----------------------------------

def _log_normalizer(u):
    u = np.asarray(u, dtype=float)
    top = np.maximum(np.maximum(u[0], u[1]), 0.0)
    return top + np.log(np.exp(u[0] - top) + np.exp(u[1] - top) + np.exp(-top))


def w_of_u(u):
    """Mass fractions ``w_i = e^{u_i} / (1 + e^{u_1} + e^{u_2})``."""
    u = np.asarray(u, dtype=float)
    top = np.maximum(np.maximum(u[0], u[1]), 0.0)
    e1, e2 = np.exp(u[0] - top), np.exp(u[1] - top)
    total = e1 + e2 + np.exp(-top)
    return np.stack([e1 / total, e2 / total])


def u_of_w(w):
    """Entropy variables ``u_i = log(w_i / (1 - w_1 - w_2))``."""
    w = np.asarray(w, dtype=float)
    w3 = 1.0 - w[0] - w[1]
    return np.stack([np.log(w[0] / w3), np.log(w[1] / w3)])


def cross_diffusion_matrix(w):
    """Diffusion matrix ``A(w)`` in physical variables, shape ``(2, 2, ...)``."""
    w1, w2 = np.asarray(w, dtype=float)
    s = 1.0 / (2.0 + 4.0 * w1 + w2)
    return s * np.array([[1.0 + 2.0 * w1, w1], [2.0 * w2, 2.0 + w2]])


def entropy_density(w):
    w1, w2 = np.asarray(w, dtype=float)
    w3 = 1.0 - w1 - w2
    return sum(wi * (np.log(wi) - 1.0) for wi in (w1, w2, w3))


def entropy_hessian(w):
    w1, w2 = np.asarray(w, dtype=float)
    r3 = 1.0 / (1.0 - w1 - w2)
    return np.array([[1.0 / w1 + r3, r3], [r3, 1.0 / w2 + r3]])


def entropy_hessian_inverse(w):
    """``[e''(w)]^{-1} = diag(w) - w w^T``."""
    w1, w2 = np.asarray(w, dtype=float)
    return np.array([[w1 * (1.0 - w1), -w1 * w2], [-w1 * w2, w2 * (1.0 - w2)]])


def entropy_mobility(w):
    """Symmetric diffusion matrix ``B = A(w) [e''(w)]^{-1}`` in closed form."""
    w1, w2 = np.asarray(w, dtype=float)
    s = 1.0 / (2.0 + 4.0 * w1 + w2)
    off = -w1 * w2 * (2.0 * w1 + w2)
    return s * np.array([
        [w1 * (1.0 + w1 - 2.0 * w1 ** 2 - w1 * w2), off],
        [off, w2 * (2.0 - w2 - 2.0 * w1 * w2 - w2 ** 2)],
    ])


def make_cross_diffusion() -> EnergyModel:
    """Three-species cross-diffusion system written in entropy variables.

    The unknowns are ``u = e'(w)``; the back transformation keeps the mass
    fractions strictly inside the simplex, so every state is admissible.
    """

    def energy_density(U, dU, x):
        lse = _log_normalizer(U)
        w = w_of_u(U)
        # sum_i w_i log w_i - 1 with log w_i = u_i - lse, log w_3 = -lse
        return w[0] * U[0] + w[1] * U[1] - lse - 1.0

    def qstar_form(U, dU, R, dR, T, dT, x):
        minv = entropy_hessian_inverse(w_of_u(U))
        return np.einsum("i...,ij...,j...->...", T, minv, R)

    def a_form(U, dU, T, dT, x):
        b = entropy_mobility(w_of_u(U))
        return -np.einsum("i...,ij...,j...->...", dT, b, dU)

    return EnergyModel(
        name="cross_diffusion",
        fields=(FieldSpec("u1"), FieldSpec("u2")),
        energy_density=energy_density,
        qstar_form=qstar_form,
        a_form=a_form,
    )


# --- nonlinear Maxwell (1D transverse reduction) ----------------------------------

def make_maxwell1d(eps0: float = 1.0, mu0: float = 1.0, chi1: float = 1.0, chi3: float = 1.0,
                   sigma: float | Callable = 0.0) -> EnergyModel:
    """Maxwell's equations in a Kerr medium, reduced to ``E = E_y(x)``, ``H = H_z(x)``.

    ``d(E) = eps0 (chi1 + chi3 E^2) E`` and ``b(H) = mu0 H``. The electric
    field is continuous piecewise linear and vanishes at both ends (perfect
    conductor); the magnetic field is piecewise constant. ``sigma`` is either
    a non-negative constant or a callable ``sigma(E)``.
    """
    for name, val in (("eps0", eps0), ("mu0", mu0), ("chi1", chi1), ("chi3", chi3)):
        if not np.isfinite(val) or val <= 0:
            raise ArgumentError(f"{name} must be positive, got {val!r}")
    if callable(sigma):
        sigma_fn = sigma
    else:
        if not np.isfinite(sigma) or sigma < 0:
            raise ArgumentError(f"conductivity must be non-negative, got {sigma!r}")
        sigma0 = float(sigma)

        def sigma_fn(E):
            return np.full_like(E, sigma0)

    def d_hat(E):
        return eps0 * (0.5 * chi1 * E ** 2 + 0.75 * chi3 * E ** 4)

    def d_prime(E):
        return eps0 * (chi1 + 3.0 * chi3 * E ** 2)

    def energy_density(U, dU, x):
        return d_hat(U[0]) + 0.5 * mu0 * U[1] ** 2

    def qstar_form(U, dU, R, dR, T, dT, x):
        return d_prime(U[0]) * R[0] * T[0] + mu0 * R[1] * T[1]

    def a_form(U, dU, T, dT, x):
        E, H = U[0], U[1]
        return H * dT[0] - sigma_fn(E) * E * T[0] - dU[0] * T[1]

    return EnergyModel(
        name="maxwell1d",
        fields=(FieldSpec("E", Kind.P1_CONTINUOUS, True, True), FieldSpec("H", Kind.P0)),
        energy_density=energy_density,
        qstar_form=qstar_form,
        a_form=a_form,
        params={"eps0": eps0, "mu0": mu0, "chi1": chi1, "chi3": chi3, "sigma": sigma_fn,
                "d_hat": d_hat, "d_prime": d_prime},
    )


# --- isentropic gas flow in a closed pipe -------------------------------------------

def pressure_potential(rho, gamma: float):
    """Internal energy density ``P(rho) = rho int_1^rho r^(gamma-2) dr``."""
    return rho * (rho ** (gamma - 1.0) - 1.0) / (gamma - 1.0)


def pressure_potential_prime(rho, gamma: float):
    return (gamma * rho ** (gamma - 1.0) - 1.0) / (gamma - 1.0)


def gas_q_matrix(rho, q, gamma: float):
    """Matrix of ``Q(rho, q)`` with ``E'(rho, q) = Q (rho, q)``."""
    rho = np.asarray(rho, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.array([[pressure_potential_prime(rho, gamma) / rho, -q / (2.0 * rho ** 2)],
                     [np.zeros_like(rho), 1.0 / rho]])


def make_gas_pipe(gamma: float) -> EnergyModel:
    """Isentropic gas flow with wall friction in a pipe closed at both ends.

    Unknowns are density ``rho`` (discontinuous P1) and mass flux ``q``
    (continuous P1, zero at both ends); pressure ``p = rho^gamma``.
    """
    if not np.isfinite(gamma) or gamma <= 1:
        raise ArgumentError(f"adiabatic exponent must satisfy gamma > 1, got {gamma!r}")
    gamma = float(gamma)

    def energy_density(U, dU, x):
        rho, q = U[0], U[1]
        return 0.5 * q ** 2 / rho + pressure_potential(rho, gamma)

    def qstar_form(U, dU, R, dR, T, dT, x):
        # transpose of Q(rho, q) applied to the rate
        rho, q = U[0], U[1]
        dp = pressure_potential_prime(rho, gamma)
        return dp / rho * R[0] * T[0] + (R[1] / rho - q / (2.0 * rho ** 2) * R[0]) * T[1]

    def a_form(U, dU, T, dT, x):
        rho, q, qx = U[0], U[1], dU[1]
        dp = pressure_potential_prime(rho, gamma)
        mass = -dp / rho * qx * T[0]
        momentum = (q ** 2 / (2.0 * rho ** 2) + dp) * dT[1] \
            - (q * qx / (2.0 * rho ** 2) + np.abs(q) * q / rho ** 2) * T[1]
        return mass + momentum

    return EnergyModel(
        name="gas",
        fields=(FieldSpec("rho", Kind.P1_DISCONTINUOUS), FieldSpec("q", Kind.P1_CONTINUOUS, True, True)),
        energy_density=energy_density,
        qstar_form=qstar_form,
        a_form=a_form,
        admissible=_positive,
        params={"gamma": gamma},
    )


# --- Hamiltonian / gradient systems ----------------------------------------------------

def invert_gradient(gradH: Callable, hessH: Callable, u, guess=None, tol: float = 1e-12, maxit: int = 60):
    """Solve ``gradH(x) = u`` pointwise by damped Newton.

    ``u`` has shape ``(dim, ...)``; ``gradH`` and ``hessH`` act on arrays of
    that shape (``hessH`` returning ``(dim, dim, ...)``). Iteration stops one
    step after the residual falls below ``tol (1 + |u|)``.
    """
    u = np.asarray(u, dtype=float)
    x = np.array(u if guess is None else guess, dtype=float)

    def resid(y):
        return gradH(y) - u

    def norm(r):
        return np.sqrt(np.sum(r ** 2, axis=0))

    scale = 1.0 + norm(u)
    r = resid(x)
    nr = norm(r)
    polish = False
    for _ in range(maxit):
        if np.all(nr <= tol * scale):
            if polish:
                return x
            polish = True
        hess = np.moveaxis(np.asarray(hessH(x), dtype=float), (0, 1), (-2, -1))
        dx = np.moveaxis(np.linalg.solve(hess, np.moveaxis(-r, 0, -1)[..., None])[..., 0], -1, 0)
        lam = np.ones_like(nr)
        for _ in range(30):
            xt = x + lam * dx
            rt = resid(xt)
            nt = norm(rt)
            worse = nt > (1.0 - 1e-4 * lam) * nr
            worse &= nr > tol * scale
            if not worse.any():
                break
            lam = np.where(worse, 0.5 * lam, lam)
        x, r, nr = xt, rt, nt
    if np.all(nr <= tol * scale):
        return x
    raise NewtonDivergence(f"gradient inversion failed, max residual {nr.max():.3e}", trace=[float(nr.max())])


def _check_structure_matrices(J, R, dim):
    J = np.asarray(J, dtype=float).reshape(dim, dim)
    R = np.asarray(R, dtype=float).reshape(dim, dim)
    if not np.allclose(J, -J.T, rtol=0, atol=1e-14):
        raise ArgumentError("J must be antisymmetric")
    if not np.allclose(R, R.T, rtol=0, atol=1e-14):
        raise ArgumentError("R must be symmetric")
    if np.linalg.eigvalsh(R).min() < -1e-14:
        raise ArgumentError("R must be positive semi-definite")
    return J, R


def make_gradient_system(H: Callable, gradH: Callable, hessH: Callable, J, R, dim: int) -> EnergyModel:
    """Port-Hamiltonian / gradient system ``x' = (J - R) grad H(x)`` in entropy variables.

    The unknowns are ``u = grad H(x)``, one spatially constant field per
    component; ``Q(u)* = [hess H(x(u))]^{-1}`` and ``A(u) = (J - R) u``.
    """
    if int(dim) != dim or dim < 1:
        raise ArgumentError(f"dimension must be a positive integer, got {dim!r}")
    dim = int(dim)
    J, R = _check_structure_matrices(J, R, dim)
    K = J - R

    def x_of_u(U):
        return invert_gradient(gradH, hessH, U)

    def energy_density(U, dU, x):
        return H(x_of_u(U))

    def qstar_form(U, dU, Rt, dR, T, dT, x):
        hess = np.moveaxis(np.asarray(hessH(x_of_u(U)), dtype=float), (0, 1), (-2, -1))
        rate = np.moveaxis(np.asarray(Rt, dtype=float), 0, -1)
        rate = np.broadcast_to(rate, hess.shape[:-1])
        scaled = np.moveaxis(np.linalg.solve(hess, rate[..., None])[..., 0], -1, 0)
        return np.sum(np.asarray(T) * scaled, axis=0)

    def a_form(U, dU, T, dT, x):
        return np.einsum("i...,ij,j...->...", T, K, U)

    return EnergyModel(
        name="gradient",
        fields=tuple(FieldSpec(f"u{i + 1}", Kind.P0) for i in range(dim)),
        energy_density=energy_density,
        qstar_form=qstar_form,
        a_form=a_form,
        spatial=False,
        params={"H": H, "gradH": gradH, "hessH": hessH, "J": J, "R": R, "x_of_u": x_of_u},
    )


def quadratic_hamiltonian(dim: int = 1):
    """``H(x) = |x|^2 / 2`` with its gradient and Hessian (vectorized)."""

    def H(x):
        return 0.5 * np.sum(np.asarray(x) ** 2, axis=0)

    def gradH(x):
        return np.array(x, dtype=float)

    def hessH(x):
        x = np.asarray(x)
        return np.eye(dim).reshape((dim, dim) + (1,) * (x.ndim - 1)) * np.ones(x.shape[1:])

    return H, gradH, hessH


def anharmonic_hamiltonian():
    """``H(q, p) = q^2/2 + q^4/4 + p^2/2``."""

    def H(x):
        q, p = x
        return 0.5 * q ** 2 + 0.25 * q ** 4 + 0.5 * p ** 2

    def gradH(x):
        q, p = x
        return np.stack([q + q ** 3, p])

    def hessH(x):
        q, p = x
        zero = np.zeros_like(q)
        return np.array([[1.0 + 3.0 * q ** 2, zero], [zero, np.ones_like(p)]])

    return H, gradH, hessH


# --- generic dispatch ---------------------------------------------------------------

@dataclass(frozen=True)
class ProblemParams:
    """Problem tag plus the keyword arguments of its constructor."""

    kind: str
    options: dict[str, Any] = field(default_factory=dict)

    def build(self) -> EnergyModel:
        try:
            factory = CONSTRUCTORS[self.kind]
        except KeyError:
            raise ArgumentError(f"unknown problem {self.kind!r}; choose from {sorted(CONSTRUCTORS)}") from None
        return factory(**self.options)


CONSTRUCTORS: dict[str, Callable[..., EnergyModel]] = {
    "heat": make_heat_log,
    "pme": make_porous_medium,
    "fokker_planck": make_fokker_planck,
    "cross_diffusion": make_cross_diffusion,
    "maxwell1d": make_maxwell1d,
    "gas": make_gas_pipe,
    "gradient": make_gradient_system,
}
