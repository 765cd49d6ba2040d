"""
Effective cavity-QED models of a cyclic (Delta-type) atomic ensemble, or a
pair of them, coupled through a microwave mode ``b`` to a two-level atom.

All frequencies and rates are angular (rad/s). Hamiltonians are written in
the frame rotating at the probe frequency::

    H = d (a^+ a + b^+ b) + (d - d_b)/2 sz + g (s b^+ + h.c.)
        - J (a^+ b + h.c.) + E_a (a^+ + a) + E_b (b^+ + b)

The two-ensemble model replaces ``a`` by ``a1, a2`` with couplings ``J_1, J_2``
and drives ``E_1, E_2`` in the same frame.

The second half of the module is the coefficient pipeline that produces
``J`` and the drives from the microscopic ensemble parameters (Bogoliubov
normal modes plus a second-order canonical transformation), and the
Morris-Shore bright/dark decomposition of the four N-V crystal classes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .errors import ResonanceError
from .hilbert import (
    ATOM,
    HilbertSpace,
    Operator,
    StateVector,
    annihilator,
    fock_state,
    identity,
    sigma_z,
)

# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------


def _check_rates(obj, names):
    for name in names:
        value = getattr(obj, name)
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"{name} must be a finite rate >= 0, got {value}")


def _check_truncations(obj, names):
    for name in names:
        value = getattr(obj, name)
        if int(value) != value or value < 2:
            raise ValueError(f"{name} must be an integer >= 2, got {value}")
        object.__setattr__(obj, name, int(value))


@dataclass(frozen=True)
class SingleEnsembleParams:
    delta: float = 0.0
    delta_b: float = 0.0
    g: float = 0.0
    J: float = 0.0
    E_a: float = 0.0
    E_b: float = 0.0
    kappa_a: float = 0.0
    kappa_b: float = 0.0
    gamma_1: float = 0.0
    gamma_phi: float = 0.0
    n_fock_a: int = 4
    n_fock_b: int = 4

    def __post_init__(self):
        _check_rates(self, ("kappa_a", "kappa_b", "gamma_1", "gamma_phi"))
        _check_truncations(self, ("n_fock_a", "n_fock_b"))

    def space(self) -> HilbertSpace:
        return HilbertSpace.single_ensemble(self.n_fock_a, self.n_fock_b)

    def replace(self, **changes) -> "SingleEnsembleParams":
        return type(self)(**{**asdict(self), **changes})


@dataclass(frozen=True)
class TwoEnsembleParams:
    delta: float = 0.0
    delta_b: float = 0.0
    g: float = 0.0
    J_1: float = 0.0
    J_2: float = 0.0
    E_1: float = 0.0
    E_2: float = 0.0
    E_b: float = 0.0
    kappa_1: float = 0.0
    kappa_2: float = 0.0
    kappa_b: float = 0.0
    gamma_1: float = 0.0
    gamma_phi: float = 0.0
    n_fock_1: int = 3
    n_fock_b: int = 3
    n_fock_2: int = 3

    def __post_init__(self):
        _check_rates(self, ("kappa_1", "kappa_2", "kappa_b", "gamma_1", "gamma_phi"))
        _check_truncations(self, ("n_fock_1", "n_fock_b", "n_fock_2"))

    @classmethod
    def symmetric(cls, *, J, E=0.0, kappa=0.0, **kw) -> "TwoEnsembleParams":
        """Identical ensembles: ``J_1 = J_2 = J``, ``E_1 = E_2 = E_b = E``,
        ``kappa_1 = kappa_2 = kappa_b = kappa`` unless overridden."""
        base = dict(J_1=J, J_2=J, E_1=E, E_2=E, E_b=E, kappa_1=kappa, kappa_2=kappa, kappa_b=kappa)
        base.update(kw)
        return cls(**base)

    def space(self) -> HilbertSpace:
        return HilbertSpace.two_ensemble(self.n_fock_1, self.n_fock_b, self.n_fock_2)

    def replace(self, **changes) -> "TwoEnsembleParams":
        return type(self)(**{**asdict(self), **changes})


# ---------------------------------------------------------------------------
# Hamiltonians and dissipators
# ---------------------------------------------------------------------------


def _hc(op: Operator) -> Operator:
    return op + op.dag()


def build_single_hamiltonian(p: SingleEnsembleParams, space: HilbertSpace = None) -> Operator:
    space = space or p.space()
    a, b, s = (annihilator(space, k) for k in ("a", "b", ATOM))
    H = (
        p.delta * (a.dag() @ a + b.dag() @ b)
        + (0.5 * (p.delta - p.delta_b)) * sigma_z(space)
        + p.g * _hc(s @ b.dag())
        - p.J * _hc(a.dag() @ b)
        + p.E_a * _hc(a)
        + p.E_b * _hc(b)
    )
    return H


def build_two_hamiltonian(p: TwoEnsembleParams, space: HilbertSpace = None) -> Operator:
    space = space or p.space()
    a1, b, a2, s = (annihilator(space, k) for k in ("a1", "b", "a2", ATOM))
    H = (
        p.delta * (a1.dag() @ a1 + b.dag() @ b + a2.dag() @ a2)
        + (0.5 * (p.delta - p.delta_b)) * sigma_z(space)
        + p.g * _hc(s @ b.dag())
        - p.J_1 * _hc(a1.dag() @ b)
        - p.J_2 * _hc(a2.dag() @ b)
        + p.E_1 * _hc(a1)
        + p.E_2 * _hc(a2)
        + p.E_b * _hc(b)
    )
    return H


def build_hamiltonian(p, space: HilbertSpace = None) -> Operator:
    if isinstance(p, TwoEnsembleParams):
        return build_two_hamiltonian(p, space)
    return build_single_hamiltonian(p, space)


def collapse_operators(p, space: HilbertSpace = None, rate_scale: float = 1.0) -> list:
    """``[(rate, op), ...]`` entering ``sum_k rate_k D[op_k]``.

    The dephasing channel is ``(gamma_phi / 2, sigma_z)``. ``rate_scale = 2``
    switches to the normalization in which a resonantly driven empty cavity
    with ``E = 0.1 kappa`` holds 0.01 photons instead of 0.04.
    """
    space = space or p.space()
    if isinstance(p, TwoEnsembleParams):
        modes = [(p.kappa_1, "a1"), (p.kappa_b, "b"), (p.kappa_2, "a2")]
    else:
        modes = [(p.kappa_a, "a"), (p.kappa_b, "b")]
    out = [(rate, annihilator(space, label)) for rate, label in modes]
    out.append((p.gamma_1, annihilator(space, ATOM)))
    out.append((0.5 * p.gamma_phi, sigma_z(space)))
    return [(rate_scale * rate, op) for rate, op in out if rate > 0]


# ---------------------------------------------------------------------------
# Excitation manifolds, dark states and polaritons
# ---------------------------------------------------------------------------


def excitation_numbers(space: HilbertSpace) -> np.ndarray:
    """Total excitation number (photons plus atomic excitation) per basis state."""
    grids = np.indices(space.dims).reshape(len(space.dims), -1)
    return grids.sum(axis=0)


def manifold_block(H: Operator, n_exc: int) -> tuple:
    """Restriction of ``H`` to the ``n_exc`` manifold: ``(block, indices)``."""
    idx = np.flatnonzero(excitation_numbers(H.space) == n_exc)
    return H.matrix[np.ix_(idx, idx)], idx


def single_excitation_energies(H: Operator, relative: bool = True) -> np.ndarray:
    """Sorted eigenvalues of ``H`` in the one-excitation manifold.

    With ``relative=True`` the vacuum energy is subtracted, giving the probe
    detunings at which each branch is resonant. At ``delta = delta_b = 0`` the
    two conventions coincide. Drives must be off for the manifold to decouple.
    """
    block, _ = manifold_block(H, 1)
    ev = np.linalg.eigvalsh(0.5 * (block + block.conj().T))
    if relative:
        vac, _ = manifold_block(H, 0)
        ev = ev - float(np.real(vac[0, 0]))
    return np.sort(ev)


def dark_state_single(g: float, J: float, space: HilbertSpace) -> StateVector:
    """``(cos(al) s^+ - sin(al) a^+)|vac>`` with ``al = -arctan(g/J)``."""
    if g == 0 and J == 0:
        raise ValueError("dark state undefined for g = J = 0")
    alpha = -math.atan(g / J) if J != 0 else -math.copysign(math.pi / 2, g)
    vac_e = fock_state(space, [0, 0], "e")
    one_a = fock_state(space, [1, 0], "g")
    return (math.cos(alpha) * vac_e + (-math.sin(alpha)) * one_a).normalized()


def dark_state_double(
    g: float, J: float, space: HilbertSpace, J_2: Optional[float] = None, naive: bool = False
) -> StateVector:
    """Zero-energy single-excitation state of the two-ensemble model.

    The optical part is carried by the collective mode
    ``(J_1 a1 + J_2 a2) / J_c`` with ``J_c = sqrt(J_1^2 + J_2^2)``, so that

        |DS> = (-g (J_1 a1^+ + J_2 a2^+)/J_c - J_c s^+) |000g> / sqrt(g^2 + J_c^2)

    which for identical ensembles reads
    ``(-(g/sqrt2)(a1^+ + a2^+) - sqrt2 J s^+)|000g> / sqrt(g^2 + 2 J^2)``.
    ``naive=True`` returns instead the variant normalized with ``J`` in
    place of ``J_c``; it has the same g >> J and g << J limits but is not an
    exact null vector.
    """
    J_1 = J
    J_2 = J if J_2 is None else J_2
    if g == 0 and J_1 == 0 and J_2 == 0:
        raise ValueError("dark state undefined for vanishing couplings")
    k1 = fock_state(space, [1, 0, 0], "g")
    k2 = fock_state(space, [0, 0, 1], "g")
    ke = fock_state(space, [0, 0, 0], "e")
    if naive:
        c = 1.0 / math.sqrt(2.0)
        return ((-g * c) * k1 + (-g * c) * k2 + (-J) * ke).normalized()
    J_c = math.hypot(J_1, J_2)
    w1, w2 = (J_1 / J_c, J_2 / J_c) if J_c > 0 else (1 / math.sqrt(2), 1 / math.sqrt(2))
    return ((-g * w1) * k1 + (-g * w2) * k2 + (-J_c) * ke).normalized()


@dataclass(frozen=True)
class PolaritonModes:
    """Dressed modes over ``(a, b, sigma)``; valid at ``delta_b = 0``."""

    q_dark: np.ndarray
    q_plus: np.ndarray
    q_minus: np.ndarray
    K: float

    @property
    def energies(self) -> tuple:
        return (0.0, self.K, -self.K)

    def matrix(self) -> np.ndarray:
        return np.vstack([self.q_dark, self.q_plus, self.q_minus])


def polariton_modes(g: float, J: float) -> PolaritonModes:
    K = math.hypot(g, J)
    if K == 0:
        raise ValueError("polariton modes need g^2 + J^2 > 0")
    r2 = math.sqrt(2.0)
    return PolaritonModes(
        q_dark=np.array([-g / K, 0.0, -J / K]),
        q_plus=np.array([-J, K, g]) / (r2 * K),
        q_minus=np.array([-J, -K, g]) / (r2 * K),
        K=K,
    )


# ---------------------------------------------------------------------------
# Microscopic ensemble parameters -> effective coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MicroscopicParams:
    """Ensemble parameters after elimination of the drive frame.

    Frame frequencies are in the frame rotating with the classical drive;
    the detunings are derived from them:
    ``Delta = -(varpi_A - omega_B)``, ``Delta_a = varpi_a - varpi_A``,
    ``Delta_b = omega_b - omega_B``. Couplings ``g_a, g_b`` are the
    collectively enhanced ones.
    """

    Omega: float
    g_a: float
    g_b: float
    varpi_a: float
    varpi_A: float
    omega_b: float
    omega_B: float
    g: float = 0.0
    Omega_A: float = 0.0
    E_b: float = 0.0
    omega_0: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if not np.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")
        if self.Omega < 0:
            raise ValueError("Omega must be >= 0")

    @classmethod
    def from_detunings(
        cls, *, Omega, g_a, g_b, Delta, Delta_a, Delta_b, omega_b=0.0, **kw
    ) -> "MicroscopicParams":
        omega_B = omega_b - Delta_b
        varpi_A = omega_B - Delta
        varpi_a = varpi_A + Delta_a
        return cls(
            Omega=Omega, g_a=g_a, g_b=g_b, varpi_a=varpi_a, varpi_A=varpi_A,
            omega_b=omega_b, omega_B=omega_B, **kw,
        )

    @property
    def Delta(self) -> float:
        return self.omega_B - self.varpi_A

    @property
    def Delta_a(self) -> float:
        return self.varpi_a - self.varpi_A

    @property
    def Delta_b(self) -> float:
        return self.omega_b - self.omega_B

    def three_photon_mismatch(self) -> float:
        return self.Delta_a - self.Delta - self.Delta_b

    def is_three_photon_resonant(self, tol: float = 1e-9) -> bool:
        scale = max(abs(self.Delta_a), abs(self.Delta), abs(self.Delta_b), self.Omega, 1.0)
        return abs(self.three_photon_mismatch()) <= tol * scale


@dataclass(frozen=True)
class BogoliubovCoeffs:
    """Normal modes ``p_pm = u_pm A + v_pm B`` of the driven quasi-spin waves.

    ``u_plus, v_plus >= 0``; the lower mode is ``(u_minus, v_minus) =
    (-v_plus, u_plus)``.
    """

    u_plus: float
    u_minus: float
    v_plus: float
    v_minus: float
    eta: float
    Omega_plus: float
    Omega_minus: float

    def u(self, lam: int) -> float:
        return self.u_plus if lam > 0 else self.u_minus

    def v(self, lam: int) -> float:
        return self.v_plus if lam > 0 else self.v_minus

    def Omega_lambda(self, lam: int) -> float:
        return self.Omega_plus if lam > 0 else self.Omega_minus


def bogoliubov(varpi_A: float, omega_B: float, Omega: float) -> BogoliubovCoeffs:
    if Omega < 0:
        raise ValueError("Omega must be >= 0")
    x = varpi_A - omega_B
    eta = math.sqrt(x * x + 4.0 * Omega * Omega)
    if eta == 0.0:
        raise ValueError("degenerate quasi-spin waves: Omega = 0 and varpi_A = omega_B")
    u_p = math.sqrt(max(eta + x, 0.0) / (2.0 * eta))
    v_p = math.sqrt(max(eta - x, 0.0) / (2.0 * eta))
    return BogoliubovCoeffs(
        u_plus=u_p,
        u_minus=-v_p,
        v_plus=v_p,
        v_minus=u_p,
        eta=eta,
        Omega_plus=0.5 * (varpi_A + omega_B + eta),
        Omega_minus=0.5 * (varpi_A + omega_B - eta),
    )


@dataclass(frozen=True)
class EffectiveCoeffs:
    """Coefficients of the transformed Hamiltonian; pairs are ordered (+, -)."""

    varpi_a_prime: float
    omega_b_prime: float
    J: float
    Omega_lambda_prime: tuple
    Q: float
    G_lambda: tuple
    E_a: float
    E_b_prime: float
    E_p_lambda: tuple

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                out[f"{f.name}_plus"] = value[0]
                out[f"{f.name}_minus"] = value[1]
            else:
                out[f.name] = value
        return out


LAMBDAS = (+1, -1)
SMALL_DENOMINATOR = 1e-6


def _denominators(p: MicroscopicParams, bog: BogoliubovCoeffs) -> tuple:
    scale = p.Omega if p.Omega > 0 else bog.eta
    da, db = {}, {}
    for lam in LAMBDAS:
        tag = "+" if lam > 0 else "-"
        da[lam] = p.varpi_a - bog.Omega_lambda(lam)
        db[lam] = p.omega_b - bog.Omega_lambda(lam)
        if abs(da[lam]) <= SMALL_DENOMINATOR * scale:
            raise ResonanceError(
                f"varpi_a is resonant with Omega_{tag} (|varpi_a - Omega_{tag}| = {abs(da[lam]):.3e})",
                symbol=f"varpi_a-Omega_{tag}",
            )
        if abs(db[lam]) <= SMALL_DENOMINATOR * scale:
            raise ResonanceError(
                f"omega_b is resonant with Omega_{tag} (|omega_b - Omega_{tag}| = {abs(db[lam]):.3e})",
                symbol=f"omega_b-Omega_{tag}",
            )
    return da, db


def effective_coeffs_exact(p: MicroscopicParams) -> EffectiveCoeffs:
    """Second-order canonical-transformation coefficients as sums over the
    two Bogoliubov modes."""
    bog = bogoliubov(p.varpi_A, p.omega_B, p.Omega)
    da, db = _denominators(p, bog)
    u, v = bog.u, bog.v
    ga, gb = p.g_a, p.g_b

    varpi_a_prime = p.varpi_a + ga**2 * sum(u(l) ** 2 / da[l] for l in LAMBDAS)
    omega_b_prime = p.omega_b + gb**2 * sum(v(l) ** 2 / db[l] for l in LAMBDAS)
    J = -0.5 * ga * gb * sum(u(l) * v(l) * (1.0 / db[l] + 1.0 / da[l]) for l in LAMBDAS)
    # each normal mode is pushed away from a and b by its own self-energy
    Omega_prime = tuple(
        bog.Omega_lambda(l) - ga**2 * u(l) ** 2 / da[l] - gb**2 * v(l) ** 2 / db[l] for l in LAMBDAS
    )
    Q = -0.5 * sum(
        gb**2 * v(l) * v(m) / db[m] + ga**2 * u(l) * u(m) / da[m]
        for l in LAMBDAS for m in LAMBDAS if l != m
    )
    G = tuple(-p.g * gb * v(l) / db[l] for l in LAMBDAS)
    E_a = p.Omega_A * ga * sum(u(l) ** 2 / da[l] for l in LAMBDAS)
    E_b_prime = p.E_b + p.Omega_A * gb * sum(u(l) * v(l) / db[l] for l in LAMBDAS)
    E_p = tuple(p.Omega_A * u(l) - p.E_b * gb * v(l) / db[l] for l in LAMBDAS)
    return EffectiveCoeffs(
        varpi_a_prime=varpi_a_prime,
        omega_b_prime=omega_b_prime,
        J=J,
        Omega_lambda_prime=Omega_prime,
        Q=Q,
        G_lambda=G,
        E_a=E_a,
        E_b_prime=E_b_prime,
        E_p_lambda=E_p,
    )


def effective_coeffs_approx(p: MicroscopicParams, warn_ratio: float = 0.3) -> EffectiveCoeffs:
    """Large-``Omega`` expansion of :func:`effective_coeffs_exact`.

    Shifts are kept to leading order in the detunings over ``Omega``; ``J``
    and ``E_b'`` carry the next relative order, ``G`` and ``E_p`` the first
    relative correction.
    """
    W = p.Omega
    if W <= 0:
        raise ValueError("the large-Omega expansion needs Omega > 0")
    D, Da, Db = p.Delta, p.Delta_a, p.Delta_b
    ratio = max(abs(D), abs(Da), abs(Db)) / W
    if ratio > warn_ratio:
        warnings.warn(
            f"large-Omega expansion used with detuning/Omega = {ratio:.2f} > {warn_ratio}",
            RuntimeWarning,
            stacklevel=2,
        )
    ga, gb, g = p.g_a, p.g_b, p.g
    ca = Da - D / 2  # varpi_a measured from the mean normal-mode frequency
    cb = Db + D / 2  # omega_b likewise
    bog = bogoliubov(p.varpi_A, p.omega_B, W)
    r2 = math.sqrt(2.0)

    varpi_a_prime = p.varpi_a - ga**2 / W**2 * (Da - D)
    omega_b_prime = p.omega_b - gb**2 / W**2 * (Db + D)
    J = ga * gb / W * (1 - D**2 / (4 * W**2) + (ca**2 + cb**2) / (2 * W**2))
    Omega_prime = tuple(
        bog.Omega_lambda(s)
        + s * ga**2 / (2 * W) * (1 + s * (Da - D) / W)
        + s * gb**2 / (2 * W) * (1 + s * (Db + D) / W)
        for s in LAMBDAS
    )
    Q = -(ga**2 * Da - gb**2 * Db - 0.5 * D * (ga**2 + gb**2)) / (2 * W**2)
    G = tuple(s * g * gb / (r2 * W) * (1 + s * (Db + 0.75 * D) / W) for s in LAMBDAS)
    E_a = -p.Omega_A * ga / W**2 * (Da - D)
    E_b_prime = p.E_b - p.Omega_A * gb / W * (1 + (cb**2 - D**2 / 4) / W**2)
    E_p = tuple(
        s * p.Omega_A / r2 * (1 - s * D / (4 * W))
        + s * p.E_b * gb / (r2 * W) * (1 + s * (Db + 0.75 * D) / W)
        for s in LAMBDAS
    )
    return EffectiveCoeffs(
        varpi_a_prime=varpi_a_prime,
        omega_b_prime=omega_b_prime,
        J=J,
        Omega_lambda_prime=Omega_prime,
        Q=Q,
        G_lambda=G,
        E_a=E_a,
        E_b_prime=E_b_prime,
        E_p_lambda=E_p,
    )


def relative_errors(exact: EffectiveCoeffs, approx: EffectiveCoeffs) -> dict:
    """``|approx - exact| / |exact|`` per coefficient (absolute error where
    the exact value vanishes)."""
    e, a = exact.as_dict(), approx.as_dict()
    out = {}
    for key, ev in e.items():
        diff = abs(a[key] - ev)
        out[key] = diff / abs(ev) if ev != 0 else diff
    return out


# ---------------------------------------------------------------------------
# Morris-Shore decomposition of the four N-V crystal classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MorrisShoreModes:
    bright_A: np.ndarray
    bright_B: np.ndarray
    dark: np.ndarray = field(repr=False)  # rows B', B'', B'''
    g_A_total: float
    g_B_total: float

    def transform(self) -> np.ndarray:
        """Rows: bright B mode followed by the three dark modes."""
        return np.vstack([self.bright_B, self.dark])


def morris_shore(g_A: Sequence[float], g_B: Sequence[float], rtol: float = 1e-9) -> MorrisShoreModes:
    gA = np.asarray(g_A, dtype=float)
    gB = np.asarray(g_B, dtype=float)
    if gA.shape != (4,) or gB.shape != (4,):
        raise ValueError("need four class couplings for each of g_A and g_B")
    if gA[0] == 0 or gB[0] == 0:
        raise ValueError("g_A1 and g_B1 must be nonzero")
    for f in range(1, 4):
        rb, ra = gB[f] / gB[0], gA[f] / gA[0]
        if abs(rb - ra) > rtol * max(abs(ra), abs(rb), 1.0):
            raise ValueError(
                f"proportionality violated for class {f + 1}: "
                f"g_B{f + 1}/g_B1 = {rb:.6g} but g_A{f + 1}/g_A1 = {ra:.6g}"
            )
    gA_tot = float(np.sqrt(np.sum(gA**2)))
    gB_tot = float(np.sqrt(np.sum(gB**2)))
    g12 = math.hypot(gB[0], gB[1])
    g34 = math.hypot(gB[2], gB[3])
    if g34 == 0:
        raise ValueError("classes 3 and 4 are both uncoupled; dark modes B' and B''' undefined")
    b1 = np.concatenate([g34 / (gB_tot * g12) * gB[:2], -g12 / (gB_tot * g34) * gB[2:]])
    b2 = np.array([gB[1], -gB[0], 0.0, 0.0]) / g12
    b3 = np.array([0.0, 0.0, gB[3], -gB[2]]) / g34
    return MorrisShoreModes(
        bright_A=gA / gA_tot,
        bright_B=gB / gB_tot,
        dark=np.vstack([b1, b2, b3]),
        g_A_total=gA_tot,
        g_B_total=gB_tot,
    )


__all__ = [
    "SingleEnsembleParams",
    "TwoEnsembleParams",
    "MicroscopicParams",
    "BogoliubovCoeffs",
    "EffectiveCoeffs",
    "PolaritonModes",
    "MorrisShoreModes",
    "build_single_hamiltonian",
    "build_two_hamiltonian",
    "build_hamiltonian",
    "collapse_operators",
    "excitation_numbers",
    "manifold_block",
    "single_excitation_energies",
    "dark_state_single",
    "dark_state_double",
    "polariton_modes",
    "bogoliubov",
    "effective_coeffs_exact",
    "effective_coeffs_approx",
    "relative_errors",
    "morris_shore",
    "identity",
]
