"""Discontinuous Galerkin dG(k) time stepping, k in {0, 1}.

On slab ``[t0, t1]`` the solution is ``u(t) = sum_j a_j s^j`` with
``s = (t - t0) / tau``. The slab equations, tested with ``phi_i s^l``, are

    int <Q(u)* du/dt - A(u), phi_i> s^l dt / tau
        + delta_l0 <Q(a_0)* (a_0 - u_prev) / tau, phi_i> = 0,

with the time integral evaluated by the ``(k+1)``-point Gauss rule. For
``k = 0`` this is exactly the implicit Euler method.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import EnergyModel, State, check_admissible, coefficients, dissipation, energy
from .diagnostics import EnergyLedger, LedgerRow
from .errors import AdmissibilityError, ArgumentError, NewtonDivergence
from .fem1d import DEFAULT_QUADRATURE, ProductSpace, Quadrature, gauss, linear_form_coefficients

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAXIT = 50
FD_EPS = 1e-6
MAX_HALVINGS = 20
STEP_RTOL = 1e-3
# residual reduction per step that counts as Newton-basin behaviour
CONTRACTION = 0.1


@dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ArgumentError("time grid needs at least one time point")
        if np.any(np.diff(t) <= 0):
            raise ArgumentError("time points must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, tau: float, n_steps: int, t0: float = 0.0) -> "TimeGrid":
        if not tau > 0:
            raise ArgumentError(f"time step must be positive, got {tau!r}")
        if int(n_steps) != n_steps or n_steps < 0:
            raise ArgumentError(f"number of steps must be a non-negative integer, got {n_steps!r}")
        return cls(t0 + tau * np.arange(int(n_steps) + 1))

    @property
    def n_slabs(self) -> int:
        return self.times.size - 1

    def slabs(self):
        return list(zip(self.times[:-1], self.times[1:]))


@dataclass(frozen=True)
class SlabSolution:
    """Polynomial-in-time solution ``sum_j a_j s^j`` on one slab."""

    t0: float
    t1: float
    coeffs: np.ndarray  # (k + 1, ndofs)
    space: ProductSpace = field(repr=False)
    newton_iters: int = 0
    residual_norm: float = 0.0

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def tau(self) -> float:
        return self.t1 - self.t0

    def at(self, t: float) -> np.ndarray:
        s = (t - self.t0) / self.tau
        return sum(a * s ** j for j, a in enumerate(self.coeffs))

    def start(self) -> np.ndarray:
        """Right limit ``u(t0+)``."""
        return self.coeffs[0].copy()

    def end(self) -> np.ndarray:
        """Left limit ``u(t1-)``."""
        return self.coeffs.sum(axis=0)

    def end_state(self) -> State:
        return State(self.space, self.end(), self.t1)


# --- Newton machinery -------------------------------------------------------------

def color_columns(sparsity) -> list[np.ndarray]:
    """Greedy grouping of columns with pairwise disjoint row patterns."""
    s = np.asarray(sparsity, dtype=bool)
    conflict = (s.T.astype(float) @ s.astype(float)) > 0
    n = s.shape[1]
    color = np.full(n, -1)
    for j in range(n):
        taken = set(color[conflict[j]].tolist())
        c = 0
        while c in taken:
            c += 1
        color[j] = c
    return [np.flatnonzero(color == c) for c in range(color.max() + 1)] if n else []


def fd_jacobian(residual, point, eps: float = FD_EPS, sparsity=None):
    """Central-difference Jacobian.

    Column ``j`` is ``(r(x + e_j d_j) - r(x - e_j d_j)) / (2 d_j)`` with
    ``d_j = eps (1 + |x_j|)``. With a boolean ``sparsity`` pattern (rows x
    columns), structurally orthogonal columns are perturbed together; each
    entry is still the same central difference.
    """
    x = np.asarray(point, dtype=float)
    n = x.size
    steps = eps * (1.0 + np.abs(x))
    if sparsity is None:
        groups = [np.array([j]) for j in range(n)]
        pattern = None
    else:
        pattern = np.asarray(sparsity, dtype=bool)
        groups = color_columns(pattern)
    jac = None
    for group in groups:
        dx = np.zeros(n)
        dx[group] = steps[group]
        xp, xm = x + dx, x - dx
        # divide by the step actually realized in floating point
        width = xp - xm
        diff = np.asarray(residual(xp)) - np.asarray(residual(xm))
        if jac is None:
            jac = np.zeros((diff.size, n))
        if pattern is None:
            jac[:, group[0]] = diff / width[group[0]]
        else:
            for j in group:
                rows = pattern[:, j]
                jac[rows, j] = diff[rows] / width[j]
    return jac if jac is not None else np.zeros((0, 0))


@dataclass
class NewtonInfo:
    iterations: int
    residual_norm: float
    trace: list[float]


def newton_solve(residual, guess, tol: float = NEWTON_TOL, maxit: int = NEWTON_MAXIT,
                 eps: float = FD_EPS, sparsity=None, max_halvings: int = MAX_HALVINGS,
                 step_rtol: float = STEP_RTOL, full_output: bool = False):
    """Damped Newton iteration with finite-difference Jacobian.

    Each step is halved (at most ``max_halvings`` times) until the residual
    2-norm satisfies the Armijo condition; trial points that raise
    :class:`AdmissibilityError` count as failures and are halved as well.

    Convergence requires ``||r||_2 <= tol`` and, if any step was taken, a last
    step that either moved ``x`` by at most ``step_rtol (1 + ||x||_inf)`` or
    cut the residual by a factor ``CONTRACTION``. This rejects iterates
    escaping to a region where a weighted residual merely decays
    (e.g. ``u -> inf`` under a ``u^-2`` weight).

    Returns the solution, or ``(x, NewtonInfo)`` when ``full_output`` is set.
    """
    x = np.array(guess, dtype=float)
    r = np.asarray(residual(x), dtype=float)
    nr = float(np.linalg.norm(r))
    trace = [nr]
    it = 0
    settled = True
    while nr > tol or not settled:
        if it >= maxit:
            why = "iterates not settling" if nr <= tol else f"residual {nr:.3e}"
            raise NewtonDivergence(f"no convergence in {maxit} iterations ({why})", trace)
        jac = fd_jacobian(residual, x, eps, sparsity)
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            raise NewtonDivergence(f"singular Jacobian at iteration {it}, residual {nr:.3e}", trace) from None
        if not np.all(np.isfinite(dx)):
            raise NewtonDivergence(f"non-finite Newton update at iteration {it}", trace)
        lam = 1.0
        last_error = None
        for _ in range(max_halvings + 1):
            xt = x + lam * dx
            try:
                rt = np.asarray(residual(xt), dtype=float)
                nt = float(np.linalg.norm(rt))
                last_error = None
            except AdmissibilityError as exc:
                nt, last_error = np.inf, exc
            # near the rounding floor a full step may not reduce ||r||; accept it
            if nt <= (1.0 - 1e-4 * lam) * nr or (nr <= tol and nt <= tol):
                break
            lam *= 0.5
        else:
            if last_error is not None:
                raise last_error
            raise NewtonDivergence(
                f"line search failed at iteration {it}, residual {nr:.3e}", trace)
        small = lam * np.max(np.abs(dx), initial=0.0) <= step_rtol * (1.0 + np.max(np.abs(xt), initial=0.0))
        settled = small or nt <= CONTRACTION * nr
        x, r, nr = xt, rt, nt
        it += 1
        trace.append(nr)
    if full_output:
        return x, NewtonInfo(it, nr, trace)
    return x


# --- slab residual -----------------------------------------------------------------

class SlabProblem:
    """Residual of one dG(k) slab as a function of the stacked coefficients."""

    def __init__(self, model: EnergyModel, spaces, t0: float, t1: float, u_prev, k: int,
                 quad: Quadrature = DEFAULT_QUADRATURE):
        if k not in (0, 1):
            raise ArgumentError(f"unsupported dG degree {k}; use 0 or 1")
        if not t1 > t0:
            raise ArgumentError(f"empty slab [{t0}, {t1}]")
        self.model = model
        self.space = ProductSpace.coerce(spaces)
        self.t0, self.t1, self.tau = float(t0), float(t1), float(t1 - t0)
        self.u_prev = coefficients(u_prev)
        self.k = k
        self.quad = quad
        tq = gauss(k + 1)
        self.s, self.omega = tq.points, tq.weights
        self.powers = self.s[None, :] ** np.arange(k + 1)[:, None]  # (k+1, ng)
        self.x = self.space.mesh.quadrature_points(quad)

    @property
    def n(self) -> int:
        return (self.k + 1) * self.space.ndofs

    def unpack(self, z):
        return np.asarray(z, dtype=float).reshape(self.k + 1, self.space.ndofs)

    def nodal_values(self, a):
        """States and time derivatives at the Gauss nodes, shape ``(ng, ndofs)``."""
        u = self.powers.T @ a
        j = np.arange(1, self.k + 1)
        if self.k:
            du = (j[:, None] * self.s[None, :] ** (j - 1)[:, None]).T @ a[1:] / self.tau
        else:
            du = np.zeros_like(u)
        return u, du

    def residual(self, z):
        a = self.unpack(z)
        ug, dug = self.nodal_values(a)
        # last batch entry carries the jump term at the slab start
        states = np.vstack([ug, a[:1]])
        rates = np.vstack([dug, (a[:1] - self.u_prev) / self.tau])
        space, model, x = self.space, self.model, self.x
        U, dU = space.evaluate(states, self.quad)
        Rt, dR = space.evaluate(rates, self.quad)
        check_admissible(model, U, x)
        shape = U.shape[1:]
        ng = self.s.size
        Ug, dUg = U[:, :ng], dU[:, :ng]

        def qstar(T, dT):
            return model.qstar_form(U, dU, Rt, dR, T, dT, x)

        def a_form(T, dT):
            return model.a_form(Ug, dUg, T, dT, x)

        cq, gq = linear_form_coefficients(qstar, space.n_fields, shape)
        ca, ga = linear_form_coefficients(a_form, space.n_fields, (ng,) + shape[1:])
        cq[:, :ng] -= ca
        gq[:, :ng] -= ga
        per_node = space.assemble(cq, gq, self.quad)  # (ng + 1, ndofs)
        res = (self.powers * self.omega) @ per_node[:ng]
        res[0] += per_node[ng]
        return res.ravel()

    def sparsity(self):
        block = self.space.coupling()
        return np.kron(np.ones((self.k + 1, self.k + 1), dtype=bool), block)

    def initial_guess(self):
        z = np.zeros((self.k + 1, self.space.ndofs))
        z[0] = self.u_prev
        return z.ravel()


def dg_step(model: EnergyModel, spaces, slab, u_prev_end, k: int = 0, tol: float = NEWTON_TOL,
            maxit: int = NEWTON_MAXIT, quad: Quadrature = DEFAULT_QUADRATURE) -> SlabSolution:
    """Solve one dG(k) slab starting from the left limit ``u_prev_end``."""
    t0, t1 = slab
    prob = SlabProblem(model, spaces, t0, t1, u_prev_end, k, quad)
    z, info = newton_solve(prob.residual, prob.initial_guess(), tol=tol, maxit=maxit,
                           sparsity=prob.sparsity(), full_output=True)
    a = prob.unpack(z)
    # a posteriori check at the slab end (Gauss nodes and start were checked)
    check_admissible(model, prob.space.evaluate(a.sum(axis=0), quad)[0], prob.x)
    return SlabSolution(t0=float(t0), t1=float(t1), coeffs=a, space=prob.space,
                        newton_iters=info.iterations, residual_norm=info.residual_norm)


def slab_dissipation(model: EnergyModel, sol: SlabSolution, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """``int D(u(t)) dt`` over the slab by the ``(k+1)``-point Gauss rule."""
    tq = gauss(sol.degree + 1)
    states = np.array([sol.at(sol.t0 + s * sol.tau) for s in tq.points])
    return float(sol.tau * np.dot(tq.weights, dissipation(model, sol.space, states, quad)))


def run_transient(model: EnergyModel, spaces, grid: TimeGrid, u0, k: int = 0, tol: float = NEWTON_TOL,
                  maxit: int = NEWTON_MAXIT, quad: Quadrature = DEFAULT_QUADRATURE):
    """March dG(k) over all slabs of ``grid``.

    Returns ``(trajectory, ledger)``. If a slab fails, the raised error gets
    ``slab_index``, ``trajectory`` and ``ledger`` attributes holding the
    partial results.
    """
    space = ProductSpace.coerce(spaces)
    u = coefficients(u0)
    e_prev = energy(model, space, u, quad)
    ledger = EnergyLedger([LedgerRow(0, float(grid.times[0]), e_prev, 0.0, 0.0, 0, 0.0)])
    trajectory: list[SlabSolution] = []
    for n, (t0, t1) in enumerate(grid.slabs(), start=1):
        try:
            sol = dg_step(model, space, (t0, t1), u, k, tol, maxit, quad)
        except (NewtonDivergence, AdmissibilityError) as exc:
            exc.slab_index = n
            exc.trajectory = trajectory
            exc.ledger = ledger
            raise
        u = sol.end()
        e = energy(model, space, u, quad)
        d = slab_dissipation(model, sol, quad)
        ledger.rows.append(LedgerRow(n, float(t1), e, d, e_prev - e - d, sol.newton_iters, sol.residual_norm))
        log.debug("slab %d: E=%.12g D=%.3e iters=%d", n, e, d, sol.newton_iters)
        trajectory.append(sol)
        e_prev = e
    return trajectory, ledger
