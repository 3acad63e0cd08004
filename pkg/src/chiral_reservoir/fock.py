"""Brute-force density-matrix integrator in a truncated Fock space.

Used only to certify the moment equations on one to three sites. Transients
are integrated with an explicit Runge-Kutta method; the steady state is the
null vector of the sparse Liouvillian, found iteratively (a sparse LU of the
superoperator runs out of memory already for two sites at cutoff 16). Vectorization is column stacking,
``vec(A X B) = (B^T kron A) vec(X)``.

Two truncations are available. ``"site"`` keeps every occupation up to
``cutoff`` on each site (the full product space). ``"total"`` keeps only
states with at most ``cutoff`` photons in total, which is much smaller for
three sites and still caps every site at ``cutoff``. In both cases the leak
check measures the population on the outermost kept states.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.integrate import solve_ivp

from .model import GaussianMoments, Hamiltonian, SqueezeParams

LEAK_TOL = 1e-6
MAX_SITES = 3
MIN_CUTOFF = 8
TRUNCATIONS = ("site", "total")


class TruncationError(RuntimeError):
    def __init__(self, leaked: float):
        self.leaked = leaked
        super().__init__(f"truncation leak: population {leaked:.3e} on the cutoff level exceeds {LEAK_TOL:.0e}")


@dataclass(frozen=True)
class FockBasis:
    """Occupation-number states kept by the truncation, one row per state.

    For ``"site"`` truncation the order matches ``kron`` (last site fastest)
    and state 0 is the vacuum in both schemes.
    """

    n_sites: int
    cutoff: int
    truncation: str = "site"

    def __post_init__(self):
        if self.truncation not in TRUNCATIONS:
            raise ValueError(f"truncation must be one of {TRUNCATIONS}, got {self.truncation!r}")

    @property
    def states(self) -> np.ndarray:
        states = itertools.product(range(self.cutoff + 1), repeat=self.n_sites)
        if self.truncation == "total":
            states = (s for s in states if sum(s) <= self.cutoff)
        return np.array(list(states), dtype=int).reshape(-1, self.n_sites)

    @property
    def size(self) -> int:
        return len(self.states)

    def edge(self) -> np.ndarray:
        """Mask of states on the truncation boundary."""
        s = self.states
        if self.truncation == "total":
            return s.sum(axis=1) == self.cutoff
        return np.any(s == self.cutoff, axis=1)

    def annihilators(self) -> list[sp.csr_matrix]:
        s = self.states
        index = {tuple(row): i for i, row in enumerate(s)}
        ops = []
        for k in range(self.n_sites):
            rows, cols, vals = [], [], []
            for j, row in enumerate(s):
                if row[k] == 0:
                    continue
                lowered = list(row)
                lowered[k] -= 1
                rows.append(index[tuple(lowered)])
                cols.append(j)
                vals.append(np.sqrt(row[k]))
            ops.append(sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(len(s), len(s))))
        return ops


@dataclass(frozen=True)
class _Operators:
    h: sp.csr_matrix
    jump: sp.csr_matrix
    decay: sp.csr_matrix  # jump^dagger jump
    gamma: float


def _operators(H: Hamiltonian, n0: int, sq: SqueezeParams, basis: FockBasis) -> _Operators:
    ops = basis.annihilators()
    dim = basis.size
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for m in range(H.dim):
        for k in range(H.dim):
            if H.entries[m, k] != 0:
                h = h + H.entries[m, k] * (ops[m].conj().T @ ops[k])
    a0 = ops[n0]
    jump = (np.cosh(sq.r) * a0 - np.exp(1j * sq.phi) * np.sinh(sq.r) * a0.conj().T).tocsr()
    return _Operators(h.tocsr(), jump, (jump.conj().T @ jump).tocsr(), sq.gamma)


def liouvillian(H: Hamiltonian, n0: int, sq: SqueezeParams, cutoff: int,
                truncation: str = "site") -> sp.csr_matrix:
    """Sparse superoperator of ``d rho/dt = i[rho, H] + gamma D[L] rho`` on ``vec(rho)``."""
    o = _operators(H, n0, sq, FockBasis(H.dim, cutoff, truncation))
    eye = sp.identity(o.h.shape[0], dtype=complex, format="csr")
    gen = 1j * (sp.kron(o.h.T, eye) - sp.kron(eye, o.h))
    gen = gen + o.gamma * (sp.kron(o.jump.conj(), o.jump)
                           - 0.5 * sp.kron(eye, o.decay) - 0.5 * sp.kron(o.decay.T, eye))
    return gen.tocsr()


def _moments(rho: np.ndarray, basis: FockBasis) -> GaussianMoments:
    ops = basis.annihilators()
    n = basis.n_sites
    normal = np.empty((n, n), dtype=complex)
    anomalous = np.empty((n, n), dtype=complex)
    for m in range(n):
        for k in range(n):
            # tr(rho X) = sum_ij rho_ij X_ji
            normal[m, k] = np.sum(rho * (ops[k].conj().T @ ops[m]).T.toarray())
            anomalous[m, k] = np.sum(rho * (ops[m] @ ops[k]).T.toarray())
    normal = 0.5 * (normal + normal.conj().T)
    anomalous = 0.5 * (anomalous + anomalous.T)
    return GaussianMoments(normal, anomalous)


def _leak(rho: np.ndarray, basis: FockBasis) -> float:
    return float(np.real(np.diag(rho))[basis.edge()].sum())


def _check(H: Hamiltonian, n0: int, cutoff: int) -> None:
    if H.dim > MAX_SITES:
        raise ValueError(f"Fock oracle supports at most {MAX_SITES} sites, got {H.dim}")
    if cutoff < MIN_CUTOFF:
        raise ValueError(f"cutoff must be >= {MIN_CUTOFF}")
    if not 0 <= n0 < H.dim:
        raise ValueError(f"drain index {n0} out of range")


def _vec(rho: np.ndarray) -> np.ndarray:
    return rho.ravel(order="F")


def _unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape(dim, dim, order="F")


def _propagate(gen: sp.csr_matrix, rho: np.ndarray, t: float, rtol: float, atol: float) -> np.ndarray:
    dim = rho.shape[0]
    sol = solve_ivp(lambda _t, y: gen @ y, (0.0, t), _vec(rho), method="DOP853",
                    t_eval=[t], rtol=rtol, atol=atol)
    if sol.status != 0:
        raise RuntimeError(f"density-matrix integration failed: {sol.message}")
    out = _unvec(sol.y[:, -1], dim)
    return 0.5 * (out + out.conj().T)


def _steady(gen: sp.csr_matrix, rho0: np.ndarray, rtol: float) -> np.ndarray:
    """Null vector of ``gen`` reached from ``rho0`` by a Jacobi-preconditioned Krylov solve.

    The Liouvillian preserves the trace, so ``gen (rho0 + x) = 0`` has a
    solution whose normalized form is the steady state. BiCGSTAB is tried
    first because it is fast; it can break down (e.g. for real Liouvillians),
    in which case restarted GMRES takes over.
    """
    dim = rho0.shape[0]
    v0 = _vec(rho0)
    diag = gen.diagonal()
    diag = np.where(np.abs(diag) > 1e-12, diag, 1.0)
    precond = sla.LinearOperator(gen.shape, lambda v: v / diag, dtype=complex)
    rhs = -(gen @ v0)
    x, info = sla.bicgstab(gen, rhs, M=precond, rtol=rtol, atol=0.0, maxiter=20000)
    if info != 0:
        x, info = sla.gmres(gen, rhs, M=precond, rtol=rtol, atol=0.0, restart=100, maxiter=2000)
    if info != 0:
        raise RuntimeError(f"steady-state solve did not converge (info = {info}); non-relaxing system?")
    rho = _unvec(v0 + x, dim)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def fock_state(H: Hamiltonian, n0: int, sq: SqueezeParams, cutoff: int = 16,
               t: float | None = None, steady_tol: float = 1e-8,
               truncation: str = "site") -> np.ndarray:
    """Density matrix at time ``t`` from vacuum, or the steady state if ``t`` is None.

    The steady state solves ``L rho = 0`` iteratively and is accepted once
    ``max |d rho/dt| <= steady_tol``. Rows and columns follow
    ``FockBasis(H.dim, cutoff, truncation).states``.
    """
    _check(H, n0, cutoff)
    gen = liouvillian(H, n0, sq, cutoff, truncation)
    dim = FockBasis(H.dim, cutoff, truncation).size
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    if t is not None:
        if t < 0:
            raise ValueError("t must be >= 0")
        return _propagate(gen, rho, t, 1e-10, 1e-13) if t > 0 else rho
    rho = _steady(gen, rho, 1e-10)
    res = float(np.max(np.abs(gen @ _vec(rho))))
    if res > steady_tol:
        raise RuntimeError(f"steady-state residual {res:.3e} exceeds {steady_tol:.1e}")
    return rho


def fock_oracle(H: Hamiltonian, n0: int, sq: SqueezeParams, cutoff: int = 16,
                t: float | None = None, truncation: str = "site") -> GaussianMoments:
    """Second moments from the truncated-Fock density matrix (steady if ``t`` is None).

    Raises :class:`TruncationError` if more than ``LEAK_TOL`` of the
    population sits on the truncation boundary.
    """
    basis = FockBasis(H.dim, cutoff, truncation)
    rho = fock_state(H, n0, sq, cutoff, t, truncation=truncation)
    leaked = _leak(rho, basis)
    if leaked > LEAK_TOL:
        raise TruncationError(leaked)
    return _moments(rho, basis)


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))
