"""
Quantum-statistical observables on density matrices.

Functions that can be ill-defined (ratios with a vanishing denominator)
return an :class:`Undefined` marker instead of NaN so result tables stay
machine readable. Pure states (:class:`StateVector`) are accepted anywhere a
density matrix is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Union

import numpy as np

from .hilbert import (
    ATOM,
    DensityMatrix,
    HilbertSpace,
    Operator,
    StateVector,
    annihilator,
    expectation,
    partial_trace,
)

State = Union[DensityMatrix, StateVector]

G2_FLOOR = 1e-9
POPULATION_FLOOR = 1e-12
SQUEEZING_FLOOR = 1e-12
ENTROPY_EIG_FLOOR = 1e-12
UNDEF_TOKEN = "undef"


@dataclass(frozen=True)
class Undefined:
    """Marker for a quantity that has no value on the given state."""

    reason: str = ""

    def __bool__(self):
        return False

    def __str__(self):
        return UNDEF_TOKEN


UNDEF = Undefined()


def is_undefined(value) -> bool:
    return isinstance(value, Undefined)


def as_float(value) -> float:
    """``float(value)``, NaN for undefined entries (for numeric post-processing)."""
    if is_undefined(value):
        return math.nan
    return float(np.real(value))


def _rho(state: State) -> DensityMatrix:
    return state.density() if isinstance(state, StateVector) else state


def _bosonic(space: HilbertSpace, mode) -> Operator:
    pos = space.index(mode)
    if space.labels[pos] == ATOM:
        raise ValueError("expected a bosonic mode, got the atom")
    return annihilator(space, pos)


def _real(z: complex) -> float:
    return float(np.real(z))


def photon_number(rho: State, mode) -> float:
    a = _bosonic(rho.space, mode)
    return _real(expectation(_rho(rho), a.dag() @ a))


def atom_excitation(rho: State) -> float:
    s = annihilator(rho.space, ATOM)
    return _real(expectation(_rho(rho), s.dag() @ s))


def population_fraction(rho: State, mode_a="a", mode_b="b", floor: float = POPULATION_FLOOR):
    """``w = (n_a - n_b) / (n_a + n_b)``."""
    n_a, n_b = photon_number(rho, mode_a), photon_number(rho, mode_b)
    total = n_a + n_b
    if total <= floor:
        return Undefined(f"n_{mode_a} + n_{mode_b} below {floor:g}")
    return (n_a - n_b) / total


@lru_cache(maxsize=64)
def _g2_ops(space: HilbertSpace, mode) -> tuple:
    a = _bosonic(space, mode)
    ad = a.dag()
    return ad @ a, ad @ ad @ a @ a


def g2_zero(rho: State, mode, floor: float = G2_FLOOR):
    """``<a^+ a^+ a a> / <a^+ a>^2``."""
    rho = _rho(rho)
    n_op, nn_op = _g2_ops(rho.space, mode)
    n = _real(expectation(rho, n_op))
    if n <= floor:
        return Undefined(f"<n_{mode}> below {floor:g}")
    return max(_real(expectation(rho, nn_op)), 0.0) / n ** 2


def vn_entropy(rho: State, subsystem="a", floor: float = ENTROPY_EIG_FLOOR) -> float:
    """Base-2 von Neumann entropy of the reduced state on ``subsystem``
    (a label, an index, or a collection of them)."""
    reduced = partial_trace(_rho(rho), subsystem).matrix
    evals = np.linalg.eigvalsh(0.5 * (reduced + reduced.conj().T))
    evals = evals[evals > floor]
    return float(max(-np.sum(evals * np.log2(evals)), 0.0)) + 0.0  # no -0.0


@lru_cache(maxsize=64)
def _lambda_ops(space: HilbertSpace, mode_i, mode_j) -> tuple:
    ai, aj = _bosonic(space, mode_i), _bosonic(space, mode_j)
    return ai.dag() @ aj, (ai.dag() @ ai) @ (aj.dag() @ aj)


def genuine_two_mode(rho: State, mode_i, mode_j) -> float:
    """``|<a_i^+ a_j>|^2 - <a_i^+ a_i a_j^+ a_j>``; positive values certify
    genuine two-mode entanglement."""
    rho = _rho(rho)
    if rho.space.index(mode_i) == rho.space.index(mode_j):
        raise ValueError("genuine_two_mode needs two distinct modes")
    coh, nn = _lambda_ops(rho.space, mode_i, mode_j)
    return abs(expectation(rho, coh)) ** 2 - _real(expectation(rho, nn))


@lru_cache(maxsize=64)
def schwinger_operators(space: HilbertSpace, mode_a="a", mode_b="b") -> tuple:
    """Hermitian pseudo-spin generators ``(J_x, J_y, J_z, N)`` of two modes."""
    a, b = _bosonic(space, mode_a), _bosonic(space, mode_b)
    ad, bd = a.dag(), b.dag()
    jx = (ad @ b + a @ bd) * 0.5
    jy = (ad @ b - a @ bd) * (-0.5j)
    jz = (ad @ a - bd @ b) * 0.5
    n = ad @ a + bd @ b
    return jx, jy, jz, n


def spin_squeezing_x(rho: State, mode_a="a", mode_b="b", floor: float = SQUEEZING_FLOOR):
    """``<N> (Delta J_x)^2 / (<J_y>^2 + <J_z>^2)``; values below 1 certify
    particle entanglement."""
    rho = _rho(rho)
    jx, jy, jz, n = schwinger_operators(rho.space, mode_a, mode_b)
    ey, ez = _real(expectation(rho, jy)), _real(expectation(rho, jz))
    denom = ey ** 2 + ez ** 2
    if denom <= floor:
        return Undefined(f"<J_y>^2 + <J_z>^2 below {floor:g}")
    ex = _real(expectation(rho, jx))
    var = max(_real(expectation(rho, jx @ jx)) - ex ** 2, 0.0)
    return _real(expectation(rho, n)) * var / denom


def fidelity_pure(rho: State, psi: StateVector) -> float:
    """``<psi| rho |psi>``."""
    rho = _rho(rho)
    if rho.space != psi.space:
        raise ValueError("state and reference live on different spaces")
    v = psi.amplitudes
    return _real(np.vdot(v, rho.matrix @ v))


@dataclass
class ObservableSet:
    """Named observable values plus the mode labels they refer to."""

    values: dict = field(default_factory=dict)
    modes: tuple = ()

    def __getitem__(self, name):
        return self.values[name]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def keys(self):
        return self.values.keys()

    def items(self):
        return self.values.items()

    def undefined(self) -> list:
        return [k for k, v in self.values.items() if is_undefined(v)]


# ---------------------------------------------------------------------------
# Named observable catalogues
# ---------------------------------------------------------------------------

SINGLE_OBSERVABLES: Mapping[str, Callable[[DensityMatrix], object]] = {
    "n_a": lambda r: photon_number(r, "a"),
    "n_b": lambda r: photon_number(r, "b"),
    "w": lambda r: population_fraction(r, "a", "b"),
    "S": lambda r: vn_entropy(r, "a"),
    "lambda_ab": lambda r: genuine_two_mode(r, "a", "b"),
    "sigma_ee": atom_excitation,
    "g2_a": lambda r: g2_zero(r, "a"),
    "g2_b": lambda r: g2_zero(r, "b"),
    "xi2_x": lambda r: spin_squeezing_x(r, "a", "b"),
}

DOUBLE_OBSERVABLES: Mapping[str, Callable[[DensityMatrix], object]] = {
    "n_1": lambda r: photon_number(r, "a1"),
    "n_b": lambda r: photon_number(r, "b"),
    "n_2": lambda r: photon_number(r, "a2"),
    "lambda_12": lambda r: genuine_two_mode(r, "a1", "a2"),
    "lambda_1b": lambda r: genuine_two_mode(r, "a1", "b"),
    "lambda_2b": lambda r: genuine_two_mode(r, "a2", "b"),
    "sigma_ee": atom_excitation,
    "S": lambda r: vn_entropy(r, "a1"),
}

# Linear in rho, hence averageable over trajectories with standard errors.
DOUBLE_LINEAR = {"n_1": "a1", "n_b": "b", "n_2": "a2"}


def evaluate(rho: State, catalogue: Mapping[str, Callable], names=None) -> ObservableSet:
    rho = _rho(rho)
    names = list(catalogue) if names is None else list(names)
    unknown = [n for n in names if n not in catalogue]
    if unknown:
        raise KeyError(f"unknown observables {unknown}; known: {sorted(catalogue)}")
    modes = tuple(l for l in rho.space.labels if l != ATOM)
    return ObservableSet({n: catalogue[n](rho) for n in names}, modes)
