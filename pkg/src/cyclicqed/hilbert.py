"""
Truncated Fock-space and qubit operator algebra.

Subsystems are ordered as declared in :class:`HilbertSpace`; the composite
basis is the Kronecker product in that order, so the *last* subsystem varies
fastest. The qubit basis is ordered (g, e) with ``sigma_z = diag(-1, +1)``.

Conventional layouts used throughout the package:

* single ensemble: ``("a", "b", "atom")``
* two ensembles:   ``("a1", "b", "a2", "atom")``
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from functools import lru_cache
from math import prod
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

ATOM = "atom"
QUBIT_LEVELS = {"g": 0, "e": 1}

Index = Union[int, str]


def _frozen(array, dtype=complex):
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of truncated subsystems."""

    dims: tuple
    labels: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(str(l) for l in self.labels)
        if not dims:
            raise ValueError("HilbertSpace needs at least one subsystem")
        if any(d < 2 for d in dims):
            raise ValueError(f"every subsystem dimension must be >= 2, got {dims}")
        if len(labels) != len(dims):
            raise ValueError("labels and dims must have the same length")
        if len(set(labels)) != len(labels):
            raise ValueError(f"subsystem labels must be unique, got {labels}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def single_ensemble(cls, n_a: int, n_b: int) -> "HilbertSpace":
        return cls((n_a, n_b, 2), ("a", "b", ATOM))

    @classmethod
    def two_ensemble(cls, n_1: int, n_b: int, n_2: int) -> "HilbertSpace":
        return cls((n_1, n_b, n_2, 2), ("a1", "b", "a2", ATOM))

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    def index(self, which: Index) -> int:
        """Position of a subsystem given by label or integer index."""
        if isinstance(which, (int, np.integer)):
            if not 0 <= which < len(self.dims):
                raise IndexError(f"subsystem index {which} out of range for {self.labels}")
            return int(which)
        try:
            return self.labels.index(which)
        except ValueError:
            raise KeyError(f"unknown subsystem {which!r}; have {self.labels}") from None

    def subspace(self, keep: Sequence[int]) -> "HilbertSpace":
        return HilbertSpace(tuple(self.dims[i] for i in keep), tuple(self.labels[i] for i in keep))


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense operator acting on ``space``."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"operator matrix has shape {m.shape}, space needs {(n, n)}")
        object.__setattr__(self, "matrix", m)

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise ValueError("operators live on different spaces")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.space, self.matrix * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.space, self.matrix / scalar)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            if other.space != self.space:
                raise ValueError("operator and state live on different spaces")
            return StateVector(self.space, self.matrix @ other.amplitudes)
        return NotImplemented

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = 1e-13) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol)


@dataclass(frozen=True, eq=False)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = _frozen(self.amplitudes).reshape(-1)
        if v.shape[0] != self.space.total_dim:
            raise ValueError(f"state has {v.shape[0]} amplitudes, space needs {self.space.total_dim}")
        object.__setattr__(self, "amplitudes", v)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / n)

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        if other.space != self.space:
            raise ValueError("states live on different spaces")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityMatrix":
        v = self.amplitudes
        return DensityMatrix(self.space, np.outer(v, v.conj()))

    def __add__(self, other):
        if isinstance(other, StateVector) and other.space == self.space:
            return StateVector(self.space, self.amplitudes + other.amplitudes)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return StateVector(self.space, self.amplitudes * scalar)
        return NotImplemented

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density operator. Shape is enforced on construction; the physical
    invariants are checked on demand by :meth:`check`, since integrators
    legitimately produce states that violate them at the tolerance level."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"density matrix has shape {m.shape}, space needs {(n, n)}")
        object.__setattr__(self, "matrix", m)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def purity(self) -> float:
        return float(np.real(np.einsum("ij,ji->", self.matrix, self.matrix)))

    def check(self, tol: float = 1e-10) -> "DensityMatrix":
        herm = self.hermiticity_error()
        if herm > tol:
            raise ValueError(f"density matrix not Hermitian: max|rho - rho^+| = {herm:.3e}")
        tr = abs(self.trace() - 1.0)
        if tr > tol:
            raise ValueError(f"density matrix trace error {tr:.3e}")
        lam = self.min_eigenvalue()
        if lam < -tol:
            raise ValueError(f"density matrix has negative eigenvalue {lam:.3e}")
        return self

    @classmethod
    def maximally_mixed(cls, space: HilbertSpace) -> "DensityMatrix":
        n = space.total_dim
        return cls(space, np.eye(n) / n)


def destroy(n_levels: int) -> Operator:
    """Truncated annihilation operator with ``M[k, k+1] = sqrt(k+1)``."""
    if int(n_levels) != n_levels or n_levels < 2:
        raise ValueError(f"n_levels must be an integer >= 2, got {n_levels}")
    n_levels = int(n_levels)
    m = np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), k=1)
    return Operator(HilbertSpace((n_levels,), ("mode",)), m)


def qubit_ops() -> tuple:
    """Return ``(sigma, sigma_z)`` in the (g, e) ordering."""
    space = HilbertSpace((2,), (ATOM,))
    sigma = np.array([[0.0, 1.0], [0.0, 0.0]])
    sigma_z = np.diag([-1.0, 1.0])
    return Operator(space, sigma), Operator(space, sigma_z)


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim))


def embed(op: Union[Operator, np.ndarray], space: HilbertSpace, position: Index) -> Operator:
    """Lift a single-subsystem operator to ``I x ... x op x ... x I``."""
    pos = space.index(position)
    m = op.matrix if isinstance(op, Operator) else np.asarray(op)
    if m.shape != (space.dims[pos], space.dims[pos]):
        raise ValueError(
            f"operator of shape {m.shape} does not fit subsystem {space.labels[pos]!r} "
            f"of dimension {space.dims[pos]}"
        )
    left = prod(space.dims[:pos])
    right = prod(space.dims[pos + 1:])
    full = np.kron(np.kron(np.eye(left), m), np.eye(right))
    return Operator(space, full)


@lru_cache(maxsize=256)
def annihilator(space: HilbertSpace, which: Index) -> Operator:
    """Embedded lowering operator of one subsystem (``sigma`` for the atom)."""
    pos = space.index(which)
    if space.labels[pos] == ATOM:
        return embed(qubit_ops()[0], space, pos)
    return embed(destroy(space.dims[pos]), space, pos)


@lru_cache(maxsize=64)
def sigma_z(space: HilbertSpace) -> Operator:
    return embed(qubit_ops()[1], space, ATOM)


def number(space: HilbertSpace, which: Index) -> Operator:
    a = annihilator(space, which)
    return a.dag() @ a


def fock_state(space: HilbertSpace, occupations: Sequence[int], qubit: str = None) -> StateVector:
    """Computational basis ket.

    ``occupations`` lists the bosonic occupations in space order, skipping the
    atom; the atom level is given by ``qubit`` ("g" or "e"). Passing one
    integer per subsystem (atom included, 0 = g) is also accepted.
    """
    occupations = list(occupations)
    n_sub = len(space.dims)
    has_atom = ATOM in space.labels
    if len(occupations) == n_sub:
        levels = occupations
        if qubit is not None:
            raise ValueError("qubit level given twice")
    else:
        if not has_atom or len(occupations) != n_sub - 1:
            raise ValueError(
                f"expected {n_sub - has_atom} occupations for {space.labels}, got {len(occupations)}"
            )
        q = QUBIT_LEVELS[qubit if qubit is not None else "g"]
        levels = []
        it = iter(occupations)
        for label in space.labels:
            levels.append(q if label == ATOM else next(it))
    for lvl, d, label in zip(levels, space.dims, space.labels):
        if not 0 <= int(lvl) < d:
            raise ValueError(f"occupation {lvl} exceeds truncation {d} of subsystem {label!r}")
    idx = int(np.ravel_multi_index(tuple(int(l) for l in levels), space.dims))
    v = np.zeros(space.total_dim, dtype=complex)
    v[idx] = 1.0
    return StateVector(space, v)


def basis_ket(space: HilbertSpace, label: str) -> StateVector:
    """Parse compact ket labels, e.g. ``"11g"`` or ``"010g"``."""
    label = label.strip().strip("|>").replace(",", "")
    *digits, q = label
    return fock_state(space, [int(c) for c in digits], q)


def ptrace_array(matrix: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    n = len(dims)
    t = np.asarray(matrix).reshape(tuple(dims) * 2)
    row = list(string.ascii_letters[:n])
    col = list(string.ascii_letters[n:2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = prod(dims[i] for i in keep)
    return reduced.reshape(d, d)


def _resolve_keep(space: HilbertSpace, keep) -> list:
    if isinstance(keep, (str, int, np.integer)):
        keep = [keep]
    idx = sorted({space.index(k) for k in keep})
    if not idx:
        raise ValueError("keep set must be nonempty")
    return idx


def partial_trace(rho: DensityMatrix, keep: Union[Index, Iterable[Index]]) -> DensityMatrix:
    """Reduced state on ``keep`` (labels or indices), in space order."""
    idx = _resolve_keep(rho.space, keep)
    reduced = ptrace_array(rho.matrix, rho.space.dims, idx)
    return DensityMatrix(rho.space.subspace(idx), reduced)


def expectation(state: Union[DensityMatrix, StateVector], op: Operator) -> complex:
    """``Tr(rho op)`` or ``<psi|op|psi>``."""
    if state.space != op.space:
        raise ValueError("state and operator live on different spaces")
    if isinstance(state, StateVector):
        v = state.amplitudes
        return complex(np.vdot(v, op.matrix @ v))
    return complex(np.einsum("ij,ji->", state.matrix, op.matrix))


def truncation_drift(
    compute: Callable[[int], Mapping[str, float]], n_levels: int, factor: int = 2
) -> dict:
    """Evaluate ``compute`` at ``n_levels`` and ``factor * n_levels`` and
    report ``|coarse - fine|`` per observable. Undefined entries are skipped."""
    coarse = compute(n_levels)
    fine = compute(factor * n_levels)
    drift = {}
    for key, value in coarse.items():
        other = fine.get(key)
        try:
            drift[key] = abs(complex(value) - complex(other))
        except (TypeError, ValueError):
            continue
    return drift
