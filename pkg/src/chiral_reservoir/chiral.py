"""Generalized chiral symmetry checks and the predicted pure steady state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GaussianMoments, Hamiltonian, SqueezeParams, SymmetryMatrix

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class SymmetryReport:
    symmetric_dev: float
    unitary_dev: float
    drain_dev: float
    tol: float = SYMMETRY_TOL

    @property
    def valid(self) -> bool:
        return max(self.symmetric_dev, self.unitary_dev, self.drain_dev) <= self.tol

    def to_document(self) -> dict:
        return {"symmetric_dev": self.symmetric_dev, "unitary_dev": self.unitary_dev,
                "drain_dev": self.drain_dev, "tol": self.tol, "valid": self.valid}


def is_valid_symmetry(sigma: SymmetryMatrix, tol: float = SYMMETRY_TOL) -> SymmetryReport:
    """Check that ``sigma`` is symmetric, unitary and leaves the drain fixed.

    Returns the three max-abs deviations; never raises.
    """
    s = sigma.entries
    eye = np.eye(sigma.dim)
    return SymmetryReport(
        symmetric_dev=float(np.max(np.abs(s - s.T))),
        unitary_dev=float(np.max(np.abs(s.conj().T @ s - eye))),
        drain_dev=float(np.max(np.abs(s[:, sigma.drain] - eye[:, sigma.drain]))),
        tol=tol,
    )


def chiral_map(h: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """``sigma^dagger h sigma + h^*``; vanishes iff ``sigma`` is a chiral symmetry of ``h``.

    Real-linear (not complex-linear) in ``h``.
    """
    return sigma.conj().T @ h @ sigma + h.conj()


def chiral_residual(H: Hamiltonian, sigma: SymmetryMatrix) -> float:
    """Max-abs entry of ``sigma^dagger H sigma + H^*``."""
    if H.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: Hamiltonian {H.dim} vs symmetry {sigma.dim}")
    return float(np.max(np.abs(chiral_map(H.entries, sigma.entries))))


def predicted_steady_moments(sigma: SymmetryMatrix, sq: SqueezeParams,
                             tol: float = SYMMETRY_TOL) -> GaussianMoments:
    """Moments of the pure squeezed steady state stabilized by a chiral symmetry.

    ``<a_m a_n> = sigma[m, n] e^{i phi} cosh r sinh r`` and, since ``sigma`` is
    unitary, ``<a_n^dagger a_m> = sinh^2 r delta_mn``.
    """
    report = is_valid_symmetry(sigma, tol)
    if not report.valid:
        raise ValueError(f"invalid symmetry matrix: {report}")
    sh, ch = np.sinh(sq.r), np.cosh(sq.r)
    normal = sh**2 * np.eye(sigma.dim, dtype=complex)
    anomalous = np.exp(1j * sq.phi) * sh * ch * np.asarray(sigma.entries)
    return GaussianMoments(normal, 0.5 * (anomalous + anomalous.T))


def purity_deviation(g: GaussianMoments) -> float:
    """Max-abs of ``M M^dagger - N (N + 1)``; zero for a pure squeezed vacuum."""
    n, m = g.normal, g.anomalous
    return float(np.max(np.abs(m @ m.conj().T - n @ (n + np.eye(g.dim)))))
