"""Eigenmode analysis and dark-mode robustness scans."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh

from .chiral import chiral_residual
from .model import Hamiltonian, SymmetryMatrix

RELAX_THRESHOLD = 1e-8
SCAN_CHIRAL_TOL = 1e-10


@dataclass(frozen=True)
class ModeSet:
    energies: np.ndarray
    wavefunctions: np.ndarray  # column i is psi^(i)

    def __len__(self) -> int:
        return self.energies.size


@dataclass(frozen=True)
class DarkModeMetrics:
    min_drain_weight: float
    min_gap: float
    threshold: float = RELAX_THRESHOLD

    @property
    def relaxing(self) -> bool:
        return self.min_drain_weight > self.threshold and self.min_gap > self.threshold

    @property
    def combined(self) -> float:
        return self.min_drain_weight * self.min_gap


def eigenmodes(H: Hamiltonian) -> ModeSet:
    """Energies in ascending order with orthonormal eigenvectors as columns.

    Each vector's phase is fixed so that its largest component is real
    positive, which makes the output reproducible.
    """
    energies, vecs = eigh(np.asarray(H.entries), driver="evd")
    vecs = np.array(vecs)
    for i in range(vecs.shape[1]):
        k = int(np.argmax(np.abs(vecs[:, i]) > np.abs(vecs[:, i]).max() * (1 - 1e-9)))
        vecs[:, i] *= np.exp(-1j * np.angle(vecs[k, i]))
    energies.setflags(write=False)
    vecs.setflags(write=False)
    return ModeSet(energies, vecs)


def dark_mode_metrics(H: Hamiltonian, n0: int, threshold: float = RELAX_THRESHOLD) -> DarkModeMetrics:
    """Weakest drain coupling ``min_i |psi^(i)_n0|`` and smallest level spacing."""
    if not 0 <= n0 < H.dim:
        raise ValueError(f"drain index {n0} out of range for dimension {H.dim}")
    modes = eigenmodes(H)
    weight = float(np.min(np.abs(modes.wavefunctions[n0, :])))
    gap = float(np.min(np.diff(modes.energies))) if H.dim > 1 else np.inf
    return DarkModeMetrics(weight, gap, threshold)


@dataclass(frozen=True)
class Family:
    """One-parameter Hamiltonian family that must stay chiral under ``sigma``."""

    name: str
    build: Callable[[float], Hamiltonian]
    sigma: SymmetryMatrix

    @property
    def drain(self) -> int:
        return self.sigma.drain


class NonChiralFamilyError(ValueError):
    def __init__(self, param: float, residual: float):
        self.param = param
        self.residual = residual
        super().__init__(f"family left the symmetry class at parameter {param!r} "
                         f"(chiral residual {residual:.3e})")


@dataclass(frozen=True)
class ScanResult:
    params: np.ndarray
    min_drain_weight: np.ndarray
    min_gap: np.ndarray

    @property
    def combined(self) -> np.ndarray:
        return self.min_drain_weight * self.min_gap

    def argmax(self) -> dict:
        out = {}
        for key, values in (("min_drain_weight", self.min_drain_weight), ("min_gap", self.min_gap),
                            ("combined", self.combined)):
            i = int(np.argmax(values))
            out[key] = {"index": i, "param": float(self.params[i]), "value": float(values[i]),
                        "interior": 0 < i < len(values) - 1}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "min_drain_weight", "min_gap"])
        for p, a, b in zip(self.params, self.min_drain_weight, self.min_gap):
            w.writerow([format(p, ".17g"), format(a, ".17g"), format(b, ".17g")])
        return buf.getvalue()


def scan(family: Family, grid: Sequence[float], n0: int | None = None,
         workers: int = 1, chiral_tol: float = SCAN_CHIRAL_TOL) -> ScanResult:
    """Evaluate both dark-mode metrics along ``grid``.

    Every generated Hamiltonian must keep ``family.sigma`` as a chiral
    symmetry; the first that does not raises :class:`NonChiralFamilyError`.
    Rows come back in grid order whatever ``workers`` is.
    """
    n0 = family.drain if n0 is None else n0
    grid = [float(p) for p in grid]

    def point(p: float) -> tuple[float, float]:
        H = family.build(p)
        res = chiral_residual(H, family.sigma)
        if res > chiral_tol:
            raise NonChiralFamilyError(p, res)
        m = dark_mode_metrics(H, n0)
        return m.min_drain_weight, m.min_gap

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(point, grid))
    else:
        rows = [point(p) for p in grid]
    arr = np.array(rows, dtype=float).reshape(len(grid), 2)
    return ScanResult(np.array(grid), arr[:, 0], arr[:, 1])


def grid_range(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive ``start..stop`` grid; endpoints exact, robust to rounding."""
    if step <= 0:
        raise ValueError("step must be > 0")
    n = int(np.floor((stop - start) / step + 1e-9))
    if n < 0:
        raise ValueError("stop must be >= start")
    return start + step * np.arange(n + 1)


def fourfold_family(name: str, L: int = 2) -> Family:
    """Named potential families on the exemplar four-fold hopping/flux configuration.

    ``alternating``: ``V_n = (-1)^q_n * p``; ``saddle``: ``V_n = p x y / L^2``;
    ``constant``: the fixed ``p``-independent lattice at ``V = J/2``.
    """
    from .exemplars import (alternating_potential, fourfold_from_fluxes, fourfold_sigma,
                            saddle_potential)

    sigma = fourfold_sigma(L)
    if name == "alternating":
        build = lambda p: fourfold_from_fluxes(L, alternating_potential(p))
    elif name == "saddle":
        build = lambda p: fourfold_from_fluxes(L, saddle_potential(p, L))
    elif name == "constant":
        fixed = fourfold_from_fluxes(L, alternating_potential(0.5))
        build = lambda p: fixed
    else:
        raise ValueError(f"unknown family {name!r}; choose alternating, saddle or constant")
    return Family(name, build, sigma)
