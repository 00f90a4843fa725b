"""Dissipative evolution problems in weighted variational form.

A problem is described by an energy ``E``, a factorization ``E'(u) = Q(u) u``
and an operator ``A`` such that the evolution reads

    <Q(u)* du/dt, v> = <A(u), v>    for all test functions v.

Testing with ``v = u`` gives ``dE/dt = <A(u), u> = -D(u)``. All pairings are
realized as quadrature sums on a :class:`~dissipative.fem1d.ProductSpace`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .errors import AdmissibilityError, ArgumentError
from .fem1d import DEFAULT_QUADRATURE, FESpace, Kind, Mesh1D, ProductSpace, Quadrature, build_uniform_mesh

TOL_STRUCT = 1e-6
FD_STEP = 1e-5


@dataclass(frozen=True)
class FieldSpec:
    """Requested finite element space of one unknown field."""

    name: str
    kind: Kind = Kind.P1_CONTINUOUS
    pin_left: bool = False
    pin_right: bool = False


@dataclass(frozen=True)
class EnergyModel:
    """Pointwise description of a dissipative evolution problem.

    The callables act on arrays of field values ``U`` and derivatives ``dU`` of
    shape ``(n_fields, ...)`` and the physical coordinate ``x`` (broadcastable
    against ``U[0]``):

    * ``energy_density(U, dU, x)`` -- integrand of the energy;
    * ``qstar_form(U, dU, R, dR, T, dT, x)`` -- integrand of
      ``<Q(u)* r, v>`` with rate slot ``R`` and test slot ``T``;
    * ``a_form(U, dU, T, dT, x)`` -- integrand of ``<A(u), v>`` after
      integration by parts;
    * ``admissible(U)`` -- boolean mask of admissible points, or ``None``.

    Both forms must be linear in the test slot, and ``qstar_form`` linear in
    the rate slot.
    """

    name: str
    fields: tuple[FieldSpec, ...]
    energy_density: Callable
    qstar_form: Callable
    a_form: Callable
    admissible: Callable | None = None
    spatial: bool = True
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def n_fields(self) -> int:
        return len(self.fields)

    def build_mesh(self, nx: int = 16, L: float = 1.0) -> Mesh1D:
        """Mesh for this model; spatially constant models use one unit element."""
        if not self.spatial:
            return build_uniform_mesh(1.0, 1)
        return build_uniform_mesh(L, nx)

    def build_spaces(self, mesh: Mesh1D) -> ProductSpace:
        return ProductSpace([FESpace(mesh, f.kind, f.pin_left, f.pin_right) for f in self.fields])


@dataclass(frozen=True)
class State:
    """Coefficients of all fields at one time."""

    space: ProductSpace
    coeffs: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (self.space.ndofs,):
            raise ArgumentError(f"state needs {self.space.ndofs} coefficients, got shape {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def field(self, i: int) -> np.ndarray:
        return self.space.split(self.coeffs)[i]


@dataclass(frozen=True)
class StructureReport:
    derivative_fd: float
    pairing: float
    discrepancy: float
    h: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.discrepancy <= self.tol


def coefficients(u) -> np.ndarray:
    """Coefficient array of a :class:`State` or array-like."""
    return np.asarray(u.coeffs if isinstance(u, State) else u, dtype=float)


def check_admissible(model: EnergyModel, U, x) -> None:
    if model.admissible is None:
        return
    ok = np.asarray(model.admissible(U))
    if ok.all():
        return
    bad = np.argwhere(~ok)[0]
    xb = np.broadcast_to(x, ok.shape)[tuple(bad)]
    vals = U[(slice(None),) + tuple(bad)]
    raise AdmissibilityError(
        f"{model.name}: inadmissible state at x={xb:.6g}, values={np.array2string(vals, precision=6)}",
        x=float(xb), values=vals.copy())


def _evaluate(model, spaces, u, quad):
    space = ProductSpace.coerce(spaces)
    U, dU = space.evaluate(coefficients(u), quad)
    x = space.mesh.quadrature_points(quad)
    check_admissible(model, U, x)
    return space, U, dU, x


def _integrate(space: ProductSpace, integrand, quad: Quadrature):
    values = np.broadcast_to(integrand, integrand.shape)
    return space.mesh.h * np.sum(values @ quad.weights, axis=-1)


def energy(model: EnergyModel, spaces, u, quad: Quadrature = DEFAULT_QUADRATURE):
    """Quadrature value of the energy. Batch axes of ``u`` are kept."""
    space, U, dU, x = _evaluate(model, spaces, u, quad)
    dens = np.broadcast_to(model.energy_density(U, dU, x), U.shape[1:])
    out = _integrate(space, dens, quad)
    return float(out) if np.ndim(out) == 0 else out


def dissipation(model: EnergyModel, spaces, u, quad: Quadrature = DEFAULT_QUADRATURE):
    """Dissipation ``D(u) = -<A(u), u>``."""
    space, U, dU, x = _evaluate(model, spaces, u, quad)
    dens = np.broadcast_to(model.a_form(U, dU, U, dU, x), U.shape[1:])
    out = -_integrate(space, dens, quad)
    return float(out) if np.ndim(out) == 0 else out


def qstar_pairing(model: EnergyModel, spaces, u, rate, test, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """``<Q(u)* rate, test>`` by quadrature."""
    space, U, dU, x = _evaluate(model, spaces, u, quad)
    R, dR = space.evaluate(coefficients(rate), quad)
    T, dT = space.evaluate(coefficients(test), quad)
    dens = np.broadcast_to(model.qstar_form(U, dU, R, dR, T, dT, x), U.shape[1:])
    return float(_integrate(space, dens, quad))


def verify_structure(model: EnergyModel, spaces, u, v, h: float = FD_STEP,
                     tol: float = TOL_STRUCT, quad: Quadrature = DEFAULT_QUADRATURE,
                     max_halvings: int = 3) -> StructureReport:
    """Compare ``E'(u)[v]`` by central differences with ``<Q(u) u, v>``.

    The pairing is assembled as ``<Q(u)* v, u>`` through the adjoint identity.
    On inadmissible perturbations the step is halved up to ``max_halvings``
    times before the error propagates. The discrepancy is relative to
    ``1 + |E'(u)[v]|``.
    """
    if h <= 0:
        raise ArgumentError(f"finite-difference step must be positive, got {h}")
    u = coefficients(u)
    v = coefficients(v)
    pairing = qstar_pairing(model, spaces, u, v, u, quad)
    for attempt in range(max_halvings + 1):
        try:
            ep = energy(model, spaces, u + h * v, quad)
            em = energy(model, spaces, u - h * v, quad)
            break
        except AdmissibilityError:
            if attempt == max_halvings:
                raise
            h *= 0.5
    fd = (ep - em) / (2.0 * h)
    disc = abs(fd - pairing) / (1.0 + abs(fd))
    return StructureReport(derivative_fd=fd, pairing=pairing, discrepancy=disc, h=h, tol=tol)


def field_values(spaces: Sequence[FESpace] | ProductSpace, u, quad: Quadrature = DEFAULT_QUADRATURE):
    """Field values at all quadrature points, shape ``(n_fields, ne, nq)``."""
    space = ProductSpace.coerce(spaces)
    return space.evaluate(coefficients(u), quad)[0]
