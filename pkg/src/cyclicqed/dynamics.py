"""
Lindblad dynamics: Liouvillian construction, steady states, master-equation
integration and Monte-Carlo wavefunction (quantum-jump) unraveling.

Master equation::

    drho/dt = -i[H, rho] + sum_k r_k (c_k rho c_k^+ - {c_k^+ c_k, rho}/2)

Vectorization is column stacking: ``vec(rho)[i + j*d] = rho[i, j]``, i.e.
``rho.reshape(-1, order="F")``. With ``vec(A X B) = (B^T kron A) vec(X)`` the
superoperator is::

    L = -i (I kron H - H^T kron I)
        + sum_k r_k [conj(c_k) kron c_k - (I kron c_k^+ c_k)/2 - ((c_k^+ c_k)^T kron I)/2]

Trajectory sub-seeds: trajectory ``k`` of a run seeded with ``seed`` draws
from ``numpy.random.default_rng(SeedSequence(seed, spawn_key=(k,)))``, which
is what ``SeedSequence(seed).spawn(n)[k]`` produces. Results therefore do
not depend on how trajectories are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from threadpoolctl import threadpool_limits

from .errors import SolverError
from .hilbert import DensityMatrix, HilbertSpace, Operator, StateVector, expectation

Collapses = Sequence[tuple]  # (rate, Operator)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int) -> np.ndarray:
    return np.asarray(v).reshape((d, d), order="F")


def _check_inputs(H: Operator, collapses: Collapses):
    if not np.all(np.isfinite(H.matrix)):
        raise ValueError("Hamiltonian has non-finite entries")
    for rate, op in collapses:
        if op.space != H.space:
            raise ValueError("collapse operator lives on a different space than H")
        if not np.isfinite(rate) or rate < 0:
            raise ValueError(f"collapse rates must be >= 0, got {rate}")


@dataclass(frozen=True, eq=False)
class Liouvillian:
    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def apply(self, rho: Union[DensityMatrix, np.ndarray]) -> np.ndarray:
        m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
        d = self.space.total_dim
        return unvec(self.matrix @ vec(m), d)

    def scale(self) -> float:
        return float(np.max(np.abs(self.matrix), initial=0.0))


def build_liouvillian(H: Operator, collapses: Collapses = ()) -> Liouvillian:
    _check_inputs(H, collapses)
    d = H.space.total_dim
    eye = np.eye(d)
    # anticommutator terms folded into H_eff = H - (i/2) sum r c^+ c:
    # L = -i I kron H_eff + i conj(H_eff) kron I + sum r conj(c) kron c
    h_eff = H.matrix.astype(complex)
    jumps = []
    for rate, op in collapses:
        if rate == 0:
            continue
        c = op.matrix
        h_eff = h_eff - 0.5j * rate * (c.conj().T @ c)
        jumps.append((rate, c))
    L = np.kron(eye, -1j * h_eff)
    L += np.kron(1j * h_eff.conj(), eye)
    for rate, c in jumps:
        L += np.kron(rate * c.conj(), c)
    return Liouvillian(H.space, L)


# ---------------------------------------------------------------------------
# Steady state
# ---------------------------------------------------------------------------

RCOND_MIN = 1e-13


def steady_state(L: Liouvillian, return_info: bool = False, rcond_min: float = RCOND_MIN):
    """Null vector of ``L`` with unit trace.

    The equation for ``rho[0, 0]`` is replaced by the (scaled) trace
    constraint and the dense system is solved by LU. A reciprocal condition
    number below ``rcond_min`` means the kernel is not one-dimensional (or
    the system is numerically singular) and raises :class:`SolverError`.

    ``info`` holds ``residual`` = ``max|L vec(rho)| / max|L|``, ``rcond``,
    ``trace_error``, ``hermiticity`` and ``min_eig``.
    """
    d = L.space.total_dim
    scale = L.scale() or 1.0
    A = np.array(L.matrix, dtype=complex, copy=True)
    trace_row = np.zeros(d * d, dtype=complex)
    trace_row[:: d + 1] = scale
    A[0, :] = trace_row
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = scale

    anorm = float(np.max(np.sum(np.abs(A), axis=0)))
    lu, piv, info = sla.lapack.zgetrf(A)
    if info > 0:
        raise SolverError("steady-state system is exactly singular (kernel not one-dimensional)")
    rcond, _ = sla.lapack.zgecon(lu, anorm, norm="1")
    if rcond < rcond_min:
        raise SolverError(
            f"steady-state system is ill-conditioned (rcond = {rcond:.2e}); "
            "the Liouvillian kernel is probably not unique"
        )
    x, _ = sla.lapack.zgetrs(lu, piv, rhs)
    rho = unvec(x, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    dm = DensityMatrix(L.space, rho)
    if not return_info:
        return dm
    resid = float(np.max(np.abs(L.matrix @ vec(rho)))) / scale
    info_d = {
        "residual": resid,
        "rcond": float(rcond),
        "trace_error": abs(np.trace(rho) - 1.0),
        "hermiticity": dm.hermiticity_error(),
        "min_eig": dm.min_eigenvalue(),
    }
    return dm, info_d


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass
class EvolutionRecord:
    """Time series produced by an integrator.

    ``observables`` maps names to lists aligned with ``times``; entries may
    be :class:`~cyclicqed.observables.Undefined`. ``states`` is filled only
    when requested.
    """

    times: np.ndarray
    observables: dict = field(default_factory=dict)
    states: Optional[list] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, series in self.observables.items():
            if len(series) != len(self.times):
                raise ValueError(f"series {name!r} has {len(series)} points, expected {len(self.times)}")

    def series(self, name: str) -> np.ndarray:
        """Real float array of one observable, NaN where undefined."""
        out = np.empty(len(self.times))
        for i, v in enumerate(self.observables[name]):
            try:
                out[i] = float(np.real(v))
            except (TypeError, ValueError):
                out[i] = np.nan
        return out


@dataclass
class TrajectoryRecord(EvolutionRecord):
    """Trajectory-averaged record.

    ``observables`` holds means of the linear expectation values (and, after
    post-processing, quantities derived from the averaged density matrix);
    ``stderr`` holds per-point standard errors of the linear ones.
    ``density`` is the outer-product average, shape ``(n_times, d, d)``.
    """

    seed: int = 0
    n_traj: int = 0
    stderr: dict = field(default_factory=dict)
    jump_log: list = field(default_factory=list)
    density: Optional[np.ndarray] = field(default=None, repr=False)
    space: Optional[HilbertSpace] = None

    def density_at(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.space, self.density[i])


# ---------------------------------------------------------------------------
# Master equation integration
# ---------------------------------------------------------------------------


def _lindblad_rhs(H: np.ndarray, collapses: Collapses, d: int):
    h_eff = H.astype(complex)
    jumps = []
    for rate, op in collapses:
        if rate == 0:
            continue
        c = op.matrix
        h_eff = h_eff - 0.5j * rate * (c.conj().T @ c)
        jumps.append((rate, c, c.conj().T))
    h_eff_dag = h_eff.conj().T

    def rhs(_t, y):
        rho = y.reshape(d, d)
        out = -1j * (h_eff @ rho - rho @ h_eff_dag)
        for rate, c, cd in jumps:
            out += rate * (c @ rho @ cd)
        return out.reshape(-1)

    return rhs


def _rk4(rhs, y0, times, max_step):
    ys = [y0]
    y = y0
    for t0, t1 in zip(times[:-1], times[1:]):
        n = max(1, int(math.ceil((t1 - t0) / max_step)))
        h = (t1 - t0) / n
        t = t0
        for _ in range(n):
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        ys.append(y)
    return np.array(ys).T


def _evaluate(e_ops: Mapping, rho: DensityMatrix) -> dict:
    out = {}
    for name, op in e_ops.items():
        out[name] = expectation(rho, op) if isinstance(op, Operator) else op(rho)
    return out


def _build_record(times, rhos, space, e_ops, keep_states, monitor, partial=False):
    series = {name: [] for name in e_ops}
    states = [] if keep_states else None
    diag = {"trace_error": [], "hermiticity": [], "min_eig": []}
    for m in rhos:
        dm = DensityMatrix(space, m)
        for name, value in _evaluate(e_ops, dm).items():
            series[name].append(value)
        if keep_states:
            states.append(dm)
        if monitor:
            diag["trace_error"].append(abs(dm.trace() - 1.0))
            diag["hermiticity"].append(dm.hermiticity_error())
            diag["min_eig"].append(dm.min_eigenvalue())
    diagnostics = {k: np.asarray(v) for k, v in diag.items()} if monitor else {}
    diagnostics["partial"] = partial
    return EvolutionRecord(np.asarray(times), series, states, diagnostics)


def evolve_master(
    H: Operator,
    collapses: Collapses,
    rho0: Union[DensityMatrix, StateVector],
    times: Sequence[float],
    rtol: float = 1e-8,
    atol: float = 1e-10,
    e_ops: Optional[Mapping[str, Union[Operator, Callable]]] = None,
    keep_states: bool = False,
    method: str = "RK45",
    max_step: Optional[float] = None,
    monitor: bool = True,
) -> EvolutionRecord:
    """Integrate the master equation and sample ``e_ops`` at ``times``.

    ``method`` is any embedded scheme accepted by :func:`solve_ivp`
    (default Dormand-Prince 4(5)) or ``"rk4"`` for classical fixed-step RK4
    with step ``max_step`` (required). On integrator failure a
    :class:`SolverError` is raised whose ``partial`` attribute holds the
    record up to the last successful sample.
    """
    _check_inputs(H, collapses)
    if isinstance(rho0, StateVector):
        rho0 = rho0.density()
    if rho0.space != H.space:
        raise ValueError("initial state lives on a different space than H")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be a strictly increasing 1-d sequence")
    e_ops = dict(e_ops or {})
    d = H.space.total_dim
    rhs = _lindblad_rhs(H.matrix, collapses, d)
    y0 = np.array(rho0.matrix, dtype=complex).reshape(-1)

    if len(times) == 1:
        ys = y0[:, None]
    elif method.lower() == "rk4":
        if not max_step:
            raise ValueError("fixed-step RK4 needs max_step")
        ys = _rk4(rhs, y0, times, max_step)
    else:
        kw = {"max_step": max_step} if max_step else {}
        sol = solve_ivp(rhs, (times[0], times[-1]), y0, method=method, t_eval=times,
                        rtol=rtol, atol=atol, **kw)
        if sol.status != 0:
            n_ok = sol.y.shape[1]
            partial = _build_record(times[:n_ok], (sol.y[:, i].reshape(d, d) for i in range(n_ok)),
                                    H.space, e_ops, keep_states, monitor, partial=True) if n_ok else None
            err = SolverError(f"master-equation integration failed at t = {sol.t[-1]:.6e}: {sol.message}")
            err.partial = partial
            raise err
        ys = sol.y
    rhos = (ys[:, i].reshape(d, d) for i in range(ys.shape[1]))
    return _build_record(times, rhos, H.space, e_ops, keep_states, monitor)


# ---------------------------------------------------------------------------
# Monte-Carlo wavefunction
# ---------------------------------------------------------------------------


class _Propagator:
    """``psi -> exp(-i H_eff tau) psi`` for a fixed non-Hermitian ``H_eff``.

    Uses the eigendecomposition when it is well conditioned, matrix
    exponentials otherwise.
    """

    COND_MAX = 1e6

    def __init__(self, h_eff: np.ndarray):
        self.h_eff = h_eff
        w, V = np.linalg.eig(h_eff)
        self.spectral = None
        if np.linalg.cond(V) < self.COND_MAX:
            self.spectral = (w, V, np.linalg.inv(V))

    def __call__(self, psi: np.ndarray, tau: float) -> np.ndarray:
        if self.spectral is not None:
            w, V, Vi = self.spectral
            return V @ (np.exp(-1j * w * tau) * (Vi @ psi))
        return sla.expm(-1j * tau * self.h_eff) @ psi


def _norm2(v):
    return float(np.real(np.vdot(v, v)))


def _trajectory_block(args):
    h_eff, jump_ops, psi0, times, seed, indices = args
    with threadpool_limits(limits=1):
        prop = _Propagator(h_eff)
        return [_one_trajectory(prop, jump_ops, psi0, times, seed, k) for k in indices]


def _one_trajectory(prop, jump_ops, psi0, times, seed, k):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
    n_t = len(times)
    out = np.empty((n_t, psi0.shape[0]), dtype=complex)
    out[0] = psi0
    log = []
    psi = psi0.copy()
    t = times[0]
    xtol = 1e-13 * max(times[-1] - times[0], 1e-300)
    r = rng.random()
    for n in range(1, n_t):
        target = times[n]
        while True:
            phi = prop(psi, target - t)
            if not jump_ops or _norm2(phi) > r:
                psi, t = phi, target
                break
            tau = brentq(lambda s: _norm2(prop(psi, s)) - r, 0.0, target - t, xtol=xtol, rtol=1e-14)
            phi = prop(psi, tau)
            cands = [j @ phi for j in jump_ops]
            weights = np.array([_norm2(c) for c in cands])
            total = weights.sum()
            if not total > 0:
                raise SolverError(
                    f"trajectory {k}: all jump channels vanish at t = {t + tau:.6e} "
                    f"(norm^2 = {_norm2(phi):.3e}, threshold {r:.3e})"
                )
            ch = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
            ch = min(ch, len(cands) - 1)
            psi = cands[ch] / math.sqrt(weights[ch])
            t = t + tau
            log.append((t, ch))
            r = rng.random()
        nrm = math.sqrt(_norm2(psi))
        if nrm == 0:
            raise SolverError(f"trajectory {k}: state norm vanished at t = {t:.6e}")
        out[n] = psi / nrm
    return out, log


def evolve_trajectories(
    H: Operator,
    collapses: Collapses,
    psi0: StateVector,
    times: Sequence[float],
    n_traj: int,
    seed: int,
    e_ops: Optional[Mapping[str, Operator]] = None,
    threads: int = 1,
    keep_density: bool = True,
) -> TrajectoryRecord:
    """Waiting-time quantum-jump unraveling.

    Each trajectory evolves under ``H_eff = H - (i/2) sum_k r_k c_k^+ c_k``
    until its squared norm reaches a uniform random threshold, then jumps
    through channel ``k`` with probability ``r_k <c_k^+ c_k>``, is
    renormalized and draws a new threshold. Means and standard errors of
    ``e_ops`` are taken over trajectories; with ``keep_density`` the averaged
    density matrices are stored too.
    """
    _check_inputs(H, collapses)
    if psi0.space != H.space:
        raise ValueError("initial state lives on a different space than H")
    if not psi0.is_normalized(1e-10):
        raise ValueError("initial state must be normalized")
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    e_ops = dict(e_ops or {})

    h_eff = H.matrix.astype(complex)
    jump_ops = []
    for rate, op in collapses:
        if rate == 0:
            continue
        c = op.matrix
        h_eff = h_eff - 0.5j * rate * (c.conj().T @ c)
        jump_ops.append(math.sqrt(rate) * c)

    indices = list(range(n_traj))
    threads = max(1, int(threads))
    n_blocks = min(threads, n_traj)
    blocks = [indices[i * n_traj // n_blocks:(i + 1) * n_traj // n_blocks] for i in range(n_blocks)]
    tasks = [(h_eff, jump_ops, psi0.amplitudes, times, seed, blk) for blk in blocks]
    if n_blocks == 1:
        results = _trajectory_block(tasks[0])
    else:
        with ProcessPoolExecutor(max_workers=n_blocks) as pool:
            results = [res for part in pool.map(_trajectory_block, tasks) for res in part]

    psis = np.stack([res[0] for res in results])  # (n_traj, n_t, d)
    jump_log = [res[1] for res in results]

    means, errs = {}, {}
    for name, op in e_ops.items():
        vals = np.einsum("kti,ij,ktj->kt", psis.conj(), op.matrix, psis)
        if op.is_hermitian(1e-12):
            vals = vals.real
        means[name] = list(vals.mean(axis=0))
        errs[name] = vals.std(axis=0, ddof=1) / math.sqrt(n_traj) if n_traj > 1 else np.zeros(len(times))

    density = None
    if keep_density:
        density = np.einsum("kti,ktj->tij", psis, psis.conj()) / n_traj
    return TrajectoryRecord(
        times=times,
        observables=means,
        seed=seed,
        n_traj=n_traj,
        stderr=errs,
        jump_log=jump_log,
        density=density,
        space=H.space,
    )
