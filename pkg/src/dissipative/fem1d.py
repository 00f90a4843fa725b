"""One-dimensional finite element machinery.

Uniform meshes on ``[0, L]``, piecewise constant (P0), continuous piecewise
linear (P1c) and discontinuous piecewise linear (P1d) spaces, composite Gauss
quadrature, L2 projection and assembly of weak forms that are linear in the
test function.

Pointwise forms are evaluated on arrays of shape ``(n_fields, ..., ne, nq)``
where ``ne`` is the number of elements and ``nq`` the number of quadrature
points per element. Leading batch axes (e.g. several time nodes) are carried
through untouched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, SingularMatrixError


class Kind(str, enum.Enum):
    P0 = "P0"
    P1_CONTINUOUS = "P1c"
    P1_DISCONTINUOUS = "P1d"


@dataclass(frozen=True)
class Quadrature:
    """Gauss rule on the reference element ``[0, 1]``."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def npoints(self) -> int:
        return len(self.points)

    @property
    def order(self) -> int:
        """Highest polynomial degree integrated exactly."""
        return 2 * self.npoints - 1


def gauss(npoints: int = 3) -> Quadrature:
    if npoints < 1:
        raise ArgumentError(f"need at least one quadrature point, got {npoints}")
    xi, w = np.polynomial.legendre.leggauss(npoints)
    return Quadrature(points=0.5 * (xi + 1.0), weights=0.5 * w)


DEFAULT_QUADRATURE = gauss(3)


@dataclass(frozen=True)
class Mesh1D:
    length: float
    n_elements: int
    nodes: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.length / self.n_elements

    def quadrature_points(self, quad: Quadrature = DEFAULT_QUADRATURE) -> np.ndarray:
        """Physical quadrature coordinates, shape ``(ne, nq)``."""
        return self.nodes[:-1, None] + self.h * quad.points[None, :]


def build_uniform_mesh(L: float, n: int) -> Mesh1D:
    """Uniform mesh of ``(0, L)`` with ``n`` elements."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ArgumentError(f"number of elements must be a positive integer, got {n!r}")
    if not np.isfinite(L) or L <= 0:
        raise ArgumentError(f"domain length must be positive, got {L!r}")
    n = int(n)
    nodes = np.linspace(0.0, float(L), n + 1)
    nodes.setflags(write=False)
    return Mesh1D(length=float(L), n_elements=n, nodes=nodes)


def integrate(mesh: Mesh1D, f: Callable, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Composite Gauss approximation of the integral of ``f`` over the mesh."""
    x = mesh.quadrature_points(quad)
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    return float(mesh.h * np.sum(fx @ quad.weights))


class FESpace:
    """Scalar finite element space on a 1D mesh.

    Pinned endpoints carry the homogeneous value 0 and are eliminated from the
    degrees of freedom, so coefficient vectors only hold free values.
    """

    def __init__(self, mesh: Mesh1D, kind: Kind | str, pin_left: bool = False,
                 pin_right: bool = False):
        kind = Kind(kind)
        if kind is not Kind.P1_CONTINUOUS and (pin_left or pin_right):
            raise ArgumentError(f"essential boundary values are only supported for P1c, not {kind.value}")
        self.mesh = mesh
        self.kind = kind
        self.pin_left = bool(pin_left)
        self.pin_right = bool(pin_right)

        ne = mesh.n_elements
        if kind is Kind.P0:
            dofs = np.arange(ne)[:, None]
        elif kind is Kind.P1_DISCONTINUOUS:
            dofs = np.arange(2 * ne).reshape(ne, 2)
        else:
            nodes = np.stack([np.arange(ne), np.arange(1, ne + 1)], axis=1)
            free = np.ones(ne + 1, dtype=bool)
            free[0] = not self.pin_left
            free[-1] = not self.pin_right
            numbering = np.full(ne + 1, -1)
            numbering[free] = np.arange(free.sum())
            dofs = numbering[nodes]
        # -1 marks a pinned (zero) value
        self.element_dofs = dofs
        self.element_dofs.setflags(write=False)
        self.ndofs = int(dofs.max()) + 1 if dofs.size and dofs.max() >= 0 else 0
        # 0/1 matrix mapping flattened (element, local) slots to free dofs
        flat = dofs.ravel()
        keep = flat >= 0
        self._gather = np.zeros((self.ndofs, flat.size))
        self._gather[flat[keep], np.flatnonzero(keep)] = 1.0

    @property
    def nlocal(self) -> int:
        return self.element_dofs.shape[1]

    def __repr__(self):
        pins = "".join(s for s, p in (("L", self.pin_left), ("R", self.pin_right)) if p)
        return f"FESpace({self.kind.value}, ne={self.mesh.n_elements}, pinned={pins or '-'})"

    def basis(self, xi):
        """Reference basis values and physical derivatives at ``xi``.

        Returns arrays of shape ``(nlocal, len(xi))``.
        """
        xi = np.asarray(xi, dtype=float)
        if self.kind is Kind.P0:
            return np.ones((1, xi.size)), np.zeros((1, xi.size))
        h = self.mesh.h
        phi = np.stack([1.0 - xi, xi])
        dphi = np.stack([np.full(xi.size, -1.0 / h), np.full(xi.size, 1.0 / h)])
        return phi, dphi

    def local_coefficients(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.ndofs:
            raise ArgumentError(f"expected {self.ndofs} coefficients, got {coeffs.shape[-1]}")
        pad = np.zeros(coeffs.shape[:-1] + (1,))
        padded = np.concatenate([coeffs, pad], axis=-1)
        return padded[..., self.element_dofs]

    def evaluate(self, coeffs, quad: Quadrature = DEFAULT_QUADRATURE):
        """Values and derivatives at all quadrature points, shape ``(..., ne, nq)``."""
        local = self.local_coefficients(coeffs)
        phi, dphi = self.basis(quad.points)
        return local @ phi, local @ dphi

    def assemble(self, cv, cg, quad: Quadrature = DEFAULT_QUADRATURE):
        """Assemble ``sum_q w_q h (cv phi_a + cg phi_a')`` into the global dofs.

        ``cv`` and ``cg`` are the coefficients multiplying the test value and
        the test derivative at every quadrature point, shape ``(..., ne, nq)``.
        """
        phi, dphi = self.basis(quad.points)
        w = self.mesh.h * quad.weights
        local = (np.asarray(cv) * w) @ phi.T + (np.asarray(cg) * w) @ dphi.T
        return local.reshape(local.shape[:-2] + (-1,)) @ self._gather.T

    def incidence(self):
        """Boolean matrix ``(ndofs, ne)``: dof ``i`` is supported on element ``e``."""
        inc = np.zeros((self.ndofs, self.mesh.n_elements), dtype=bool)
        for a in range(self.nlocal):
            d = self.element_dofs[:, a]
            keep = d >= 0
            inc[d[keep], np.flatnonzero(keep)] = True
        return inc

    def mass_matrix(self, quad: Quadrature = DEFAULT_QUADRATURE):
        phi, _ = self.basis(quad.points)
        local = self.mesh.h * (phi * quad.weights) @ phi.T
        m = np.zeros((self.ndofs, self.ndofs))
        for e, dofs in enumerate(self.element_dofs):
            for a, i in enumerate(dofs):
                if i < 0:
                    continue
                for b, j in enumerate(dofs):
                    if j >= 0:
                        m[i, j] += local[a, b]
        return m


def _unpinned(space: FESpace) -> FESpace:
    if not (space.pin_left or space.pin_right):
        return space
    return FESpace(space.mesh, space.kind)


def _drop_pinned(space: FESpace, full_coeffs):
    if not (space.pin_left or space.pin_right):
        return full_coeffs
    lo = 1 if space.pin_left else 0
    hi = len(full_coeffs) - 1 if space.pin_right else len(full_coeffs)
    return full_coeffs[lo:hi]


def eval_fe(space: FESpace, coeffs, x: float):
    """Value and derivative of a finite element function at a single point.

    At interior nodes the element to the left owns the point, so the derivative
    there is the left one-sided derivative.
    """
    mesh = space.mesh
    if not (0.0 <= x <= mesh.length):
        raise ArgumentError(f"x={x} outside [0, {mesh.length}]")
    e = int(np.clip(np.ceil(x / mesh.h) - 1, 0, mesh.n_elements - 1))
    xi = (x - mesh.nodes[e]) / mesh.h
    local = space.local_coefficients(coeffs)[e]
    phi, dphi = space.basis(np.array([xi]))
    return float(local @ phi[:, 0]), float(local @ dphi[:, 0])


def interpolate(space: FESpace, f: Callable):
    """Nodal interpolant (P1 kinds) or midpoint value (P0)."""
    mesh = space.mesh
    if space.kind is Kind.P0:
        return np.asarray(f(0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])), dtype=float) * np.ones(mesh.n_elements)
    if space.kind is Kind.P1_DISCONTINUOUS:
        ends = np.stack([mesh.nodes[:-1], mesh.nodes[1:]], axis=1).ravel()
        return np.asarray(f(ends), dtype=float) * np.ones(ends.size)
    full = np.asarray(f(mesh.nodes), dtype=float) * np.ones(mesh.nodes.size)
    return _drop_pinned(space, full)


def l2_project(space: FESpace, f: Callable, quad: Quadrature = DEFAULT_QUADRATURE):
    """L2 projection of ``f``; pinned values are overwritten by zero afterwards."""
    full = _unpinned(space)
    x = full.mesh.quadrature_points(quad)
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    rhs = full.assemble(fx, np.zeros_like(fx), quad)
    m = full.mass_matrix(quad)
    try:
        coeffs = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"mass matrix of {space!r} is singular") from exc
    return _drop_pinned(space, coeffs)


class ProductSpace:
    """Tuple of scalar spaces on a common mesh; coefficients are concatenated."""

    def __init__(self, spaces: Sequence[FESpace]):
        spaces = tuple(spaces)
        if not spaces:
            raise ArgumentError("a product space needs at least one factor")
        mesh = spaces[0].mesh
        if any(s.mesh is not mesh for s in spaces):
            raise ArgumentError("all factor spaces must share one mesh")
        self.spaces = spaces
        self.mesh = mesh
        sizes = [s.ndofs for s in spaces]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.ndofs = int(self.offsets[-1])

    @classmethod
    def coerce(cls, spaces) -> "ProductSpace":
        if isinstance(spaces, ProductSpace):
            return spaces
        if isinstance(spaces, FESpace):
            return cls([spaces])
        return cls(spaces)

    @property
    def n_fields(self) -> int:
        return len(self.spaces)

    def __len__(self):
        return len(self.spaces)

    def __iter__(self):
        return iter(self.spaces)

    def __getitem__(self, i):
        return self.spaces[i]

    def __repr__(self):
        return f"ProductSpace({', '.join(map(repr, self.spaces))})"

    def split(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.ndofs:
            raise ArgumentError(f"expected {self.ndofs} coefficients, got {coeffs.shape[-1]}")
        return [coeffs[..., a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def join(self, parts):
        return np.concatenate([np.asarray(p, dtype=float) for p in parts], axis=-1)

    def evaluate(self, coeffs, quad: Quadrature = DEFAULT_QUADRATURE):
        """Field values and derivatives, each of shape ``(n_fields, ..., ne, nq)``."""
        vals, grads = zip(*(s.evaluate(c, quad) for s, c in zip(self.spaces, self.split(coeffs))))
        return np.stack(vals), np.stack(grads)

    def assemble(self, cv, cg, quad: Quadrature = DEFAULT_QUADRATURE):
        return self.join([s.assemble(v, g, quad) for s, v, g in zip(self.spaces, cv, cg)])

    def interpolate(self, *functions):
        return self.join([interpolate(s, f) for s, f in zip(self.spaces, functions)])

    def project(self, *functions, quad: Quadrature = DEFAULT_QUADRATURE):
        return self.join([l2_project(s, f, quad) for s, f in zip(self.spaces, functions)])

    def coupling(self):
        """Boolean ``(ndofs, ndofs)`` pattern of dofs that share an element."""
        inc = np.concatenate([s.incidence() for s in self.spaces]).astype(float)
        return (inc @ inc.T) > 0


def linear_form_coefficients(form: Callable, n_fields: int, shape):
    """Split a test-linear pointwise form into value and derivative coefficients.

    ``form(T, dT)`` must be linear in the test slots ``T`` and ``dT`` (arrays of
    shape ``(n_fields,) + shape``). Returns ``(cv, cg)`` with
    ``form(T, dT) == sum_f cv[f] T[f] + cg[f] dT[f]`` pointwise.
    """
    zero = np.zeros((n_fields,) + tuple(shape))
    cv = np.empty_like(zero)
    cg = np.empty_like(zero)
    for f in range(n_fields):
        unit = zero.copy()
        unit[f] = 1.0
        cv[f] = np.broadcast_to(form(unit, zero), shape)
        cg[f] = np.broadcast_to(form(zero, unit), shape)
    return cv, cg


def assemble_linear_form(space: ProductSpace, form: Callable, shape,
                         quad: Quadrature = DEFAULT_QUADRATURE):
    """Vector of ``int form(phi_i)`` over all basis functions of ``space``."""
    cv, cg = linear_form_coefficients(form, space.n_fields, shape)
    return space.assemble(cv, cg, quad)


def assemble_residual(model, spaces, u, udot, quad: Quadrature = DEFAULT_QUADRATURE):
    """Residual of the semi-discrete weighted variational principle.

    Entry ``i`` is ``<Q(u)* udot, phi_i> - <A(u), phi_i>``. Leading batch axes
    of ``u`` and ``udot`` are supported.
    """
    from .core import check_admissible, coefficients

    space = ProductSpace.coerce(spaces)
    u = coefficients(u)
    udot = coefficients(udot)
    U, dU = space.evaluate(u, quad)
    R, dR = space.evaluate(udot, quad)
    x = space.mesh.quadrature_points(quad)
    check_admissible(model, U, x)
    shape = U.shape[1:]

    def weak(T, dT):
        return model.qstar_form(U, dU, R, dR, T, dT, x) - model.a_form(U, dU, T, dT, x)

    return assemble_linear_form(space, weak, shape, quad)
