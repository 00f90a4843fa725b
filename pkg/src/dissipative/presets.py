"""Named initial conditions, default parameters and state samplers per problem.

Initial conditions are given in closed form; P1 fields are interpolated at the
nodes (pinned values dropped) and P0 fields take midpoint values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import problems
from .core import EnergyModel
from .errors import ArgumentError
from .fem1d import Kind, ProductSpace


@dataclass(frozen=True)
class Preset:
    tau: float
    ics: dict[str, Callable]
    default_ic: str
    steady_ic: str
    sampler: Callable


def _heat_ics(L):
    return {
        "shifted_cosine": lambda space, model: space.interpolate(lambda x: 2.0 + np.cos(np.pi * x / L)),
        "constant": lambda space, model: space.interpolate(lambda x: 1.5 + 0 * x),
    }


def _pme_ics(L):
    return {
        "sine_bump": lambda space, model: space.interpolate(lambda x: 1.0 + 0.5 * np.sin(np.pi * x / L)),
        "constant": lambda space, model: space.interpolate(lambda x: 2.0 + 0 * x),
    }


def _fp_ics(L):
    return {
        "cosine": lambda space, model: space.interpolate(lambda x: 1.0 + 0.1 * np.cos(np.pi * x / L)),
        "steady": lambda space, model: space.interpolate(lambda x: 1.0 + 0 * x),
    }


def _cross_ics(L):
    def bump(space, model):
        c = lambda x: np.cos(np.pi * x / L)
        w = lambda x: np.stack([0.3 + 0.15 * c(x), 0.3 - 0.1 * c(x)])
        return space.interpolate(lambda x: problems.u_of_w(w(x))[0], lambda x: problems.u_of_w(w(x))[1])

    return {
        "bump": bump,
        "constant": lambda space, model: space.interpolate(lambda x: -0.5 + 0 * x, lambda x: 0.25 + 0 * x),
    }


def _maxwell_ics(L):
    return {
        "mode": lambda space, model: space.interpolate(lambda x: 0.5 * np.sin(np.pi * x / L), lambda x: 0 * x),
        "rest": lambda space, model: space.interpolate(lambda x: 0 * x, lambda x: 0.3 + 0 * x),
    }


def _gas_ics(L):
    return {
        "flux_bump": lambda space, model: space.interpolate(
            lambda x: 1.0 + 0 * x, lambda x: 0.1 * np.sin(np.pi * x / L)),
        "rest": lambda space, model: space.interpolate(lambda x: 1.2 + 0 * x, lambda x: 0 * x),
    }


def _gradient_ics(L):
    def displaced(space, model):
        dim = space.n_fields
        x0 = np.zeros(dim)
        x0[0] = 1.0
        u0 = model.params["gradH"](x0)
        return space.join([np.full(s.ndofs, u0[i]) for i, s in enumerate(space)])

    return {
        "displaced": displaced,
        "rest": lambda space, model: np.zeros(space.ndofs),
    }


def _uniform_fields(lows, highs):
    """Sampler drawing every free coefficient of field i from U(lows[i], highs[i])."""

    def sample(space: ProductSpace, rng: np.random.Generator):
        return space.join([rng.uniform(lo, hi, s.ndofs) for s, lo, hi in zip(space, lows, highs)])

    return sample


def _gradient_sampler(space: ProductSpace, rng: np.random.Generator):
    return rng.uniform(-1.5, 1.5, space.ndofs)


PRESETS: dict[str, Callable[[float], Preset]] = {
    "heat": lambda L: Preset(0.005, _heat_ics(L), "shifted_cosine", "constant", _uniform_fields([0.5], [2.0])),
    "pme": lambda L: Preset(0.005, _pme_ics(L), "sine_bump", "constant", _uniform_fields([0.5], [2.0])),
    "fokker_planck": lambda L: Preset(0.01, _fp_ics(L), "cosine", "steady", _uniform_fields([0.2], [2.0])),
    "cross_diffusion": lambda L: Preset(0.005, _cross_ics(L), "bump", "constant",
                                        _uniform_fields([-2.0, -2.0], [2.0, 2.0])),
    "maxwell1d": lambda L: Preset(0.02, _maxwell_ics(L), "mode", "rest", _uniform_fields([-1.0, -1.0], [1.0, 1.0])),
    "gas": lambda L: Preset(0.01, _gas_ics(L), "flux_bump", "rest", _uniform_fields([0.5, -0.5], [1.5, 0.5])),
    "gradient": lambda L: Preset(0.1, _gradient_ics(L), "displaced", "rest", _gradient_sampler),
}


def preset(kind: str, L: float = 1.0) -> Preset:
    try:
        return PRESETS[kind](L)
    except KeyError:
        raise ArgumentError(f"unknown problem {kind!r}; choose from {sorted(PRESETS)}") from None


def initial_state(kind: str, model: EnergyModel, space: ProductSpace, ic: str | None = None, L: float = 1.0):
    p = preset(kind, L)
    name = ic or p.default_ic
    try:
        return p.ics[name](space, model)
    except KeyError:
        raise ArgumentError(f"unknown initial condition {name!r} for {kind}; choose from {sorted(p.ics)}") from None


def default_model(kind: str, **overrides) -> EnergyModel:
    """Model with the default parameters used by the presets."""
    defaults: dict[str, dict] = {
        "heat": {},
        "pme": {"m": 2.0},
        "fokker_planck": {},
        "cross_diffusion": {},
        "maxwell1d": {"eps0": 1.0, "mu0": 1.0, "chi1": 1.0, "chi3": 0.5, "sigma": 0.5},
        "gas": {"gamma": 2.0},
    }
    if kind == "gradient":
        return gradient_model(**overrides)
    if kind not in defaults:
        raise ArgumentError(f"unknown problem {kind!r}")
    return problems.ProblemParams(kind, {**defaults[kind], **overrides}).build()


def gradient_model(hamiltonian: str = "quadratic", dim: int | None = None, J=None, R=None) -> EnergyModel:
    if hamiltonian == "quadratic":
        dim = dim or 1
        H = problems.quadratic_hamiltonian(dim)
    elif hamiltonian == "anharmonic":
        if dim not in (None, 2):
            raise ArgumentError("the anharmonic Hamiltonian has dimension 2")
        dim = 2
        H = problems.anharmonic_hamiltonian()
    else:
        raise ArgumentError(f"unknown Hamiltonian {hamiltonian!r}; use 'quadratic' or 'anharmonic'")
    if J is None:
        J = np.zeros((dim, dim))
        if hamiltonian == "anharmonic":
            J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    if R is None:
        R = np.zeros((dim, dim)) if hamiltonian == "anharmonic" else np.eye(dim)
    return problems.make_gradient_system(*H, J=J, R=R, dim=dim)
