"""Turn a Hamiltonian template plus a target symmetry into the admissible family.

The chiral condition ``sigma^dagger H sigma = -H^*`` mixes ``H`` with its
complex conjugate, so it is linear over the reals only. Every free entry is
therefore split into real and imaginary unknowns and the system is solved with
real dense linear algebra.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .chiral import chiral_map, is_valid_symmetry
from .model import FormatError, Hamiltonian, SymmetryMatrix

CONSTRAINT_TOL = 1e-10


class Tag(enum.Enum):
    FIXED = "fixed"
    FREE_COMPLEX = "free_complex"
    FREE_REAL = "free_real"
    ZERO = "zero"


class InfeasibleError(ValueError):
    """No Hamiltonian in the template satisfies the chiral condition.

    ``residual`` is the largest equation violation at the least-squares optimum
    and ``worst_entry`` the ``(m, n, part)`` of the matrix entry where it occurs.
    """

    def __init__(self, residual: float, worst_equation: int, worst_entry: tuple[int, int, str]):
        self.residual = residual
        self.worst_equation = worst_equation
        self.worst_entry = worst_entry
        m, n, part = worst_entry
        super().__init__(f"infeasible: residual {residual:.3e} at equation {worst_equation} "
                         f"({part} part of entry ({m}, {n}))")


@dataclass(frozen=True)
class HTemplate:
    """Per-entry tags for the upper triangle of ``H``; unlisted entries are zero.

    ``tags[(m, n)]`` with ``m <= n`` is ``(Tag, value)``; ``value`` is only
    meaningful for ``Tag.FIXED``. Entry ``(n, m)`` is tied to the conjugate.
    """

    dim: int
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("template dimension must be >= 1")
        clean = {}
        for (m, n), spec in self.tags.items():
            tag, value = spec if isinstance(spec, tuple) else (spec, 0.0)
            tag = Tag(tag)
            m, n = int(m), int(n)
            if not (0 <= m < self.dim and 0 <= n < self.dim):
                raise ValueError(f"entry ({m}, {n}) out of range for dimension {self.dim}")
            value = complex(value)
            if m > n:
                m, n, value = n, m, value.conjugate()
            if m == n:
                if tag is Tag.FREE_COMPLEX:
                    raise ValueError(f"diagonal entry ({m}, {m}) cannot be free_complex")
                if tag is Tag.FIXED and value.imag != 0:
                    raise ValueError(f"fixed diagonal entry ({m}, {m}) must be real")
            if tag is Tag.ZERO:
                continue
            clean[(m, n)] = (tag, value if tag is Tag.FIXED else 0j)
        object.__setattr__(self, "tags", dict(sorted(clean.items())))

    @classmethod
    def from_matrix(cls, H: Hamiltonian | np.ndarray) -> "HTemplate":
        """All nonzero entries of ``H`` fixed."""
        h = H.entries if isinstance(H, Hamiltonian) else np.asarray(H, dtype=complex)
        return cls(h.shape[0], {(m, n): (Tag.FIXED, h[m, n]) for m in range(h.shape[0])
                                for n in range(m, h.shape[0]) if h[m, n] != 0})

    @classmethod
    def free_on(cls, dim: int, diagonal: Iterable[int] = (), pairs: Iterable[tuple[int, int]] = (),
                fixed: dict | None = None) -> "HTemplate":
        """Free real diagonal on ``diagonal``, free complex couplings on ``pairs``."""
        tags = {(i, i): Tag.FREE_REAL for i in diagonal}
        tags.update({tuple(sorted(p)): Tag.FREE_COMPLEX for p in pairs})
        for key, value in (fixed or {}).items():
            tags[tuple(key)] = (Tag.FIXED, value)
        return cls(dim, tags)

    def fixed_matrix(self) -> np.ndarray:
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for (m, n), (tag, value) in self.tags.items():
            if tag is Tag.FIXED:
                h[m, n] = value
                h[n, m] = value.conjugate()
        return h

    def unit_matrices(self) -> list[np.ndarray]:
        """Frobenius-orthonormal Hermitian matrices, one per real unknown."""
        out = []
        for (m, n), (tag, _) in self.tags.items():
            if tag is Tag.FREE_REAL:
                e = np.zeros((self.dim, self.dim), dtype=complex)
                e[m, m] = 1.0
                out.append(e)
            elif tag is Tag.FREE_COMPLEX:
                re = np.zeros((self.dim, self.dim), dtype=complex)
                re[m, n] = re[n, m] = 1 / np.sqrt(2)
                im = np.zeros((self.dim, self.dim), dtype=complex)
                im[m, n], im[n, m] = 1j / np.sqrt(2), -1j / np.sqrt(2)
                out.extend([re, im])
        return out

    def to_document(self) -> dict:
        entries = []
        for (m, n), (tag, value) in self.tags.items():
            item = {"m": m, "n": n, "tag": tag.value}
            if tag is Tag.FIXED:
                item["value"] = [value.real, value.imag]
            entries.append(item)
        return {"kind": "template", "dim": self.dim, "entries": entries}

    @classmethod
    def from_document(cls, doc: dict, where: str = "<template>") -> "HTemplate":
        try:
            dim = doc["dim"]
            raw = doc["entries"]
        except KeyError as exc:
            raise FormatError(f"{where}: missing field {exc.args[0]!r}") from None
        tags = {}
        for k, item in enumerate(raw):
            try:
                key = (int(item["m"]), int(item["n"]))
                tag = Tag(item["tag"])
                value = complex(*item["value"]) if tag is Tag.FIXED else 0j
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{where}: entries[{k}]: {exc}") from None
            tags[key] = (tag, value)
        try:
            return cls(int(dim), tags)
        except ValueError as exc:
            raise FormatError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class LinearSystem:
    """Real system ``matrix @ x = rhs``; rows are Re then Im of all N^2 entries."""

    matrix: np.ndarray
    rhs: np.ndarray
    units: list
    offset: np.ndarray
    dim: int

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[1]

    def equation_entry(self, row: int) -> tuple[int, int, str]:
        nn = self.dim * self.dim
        part = "real" if row < nn else "imag"
        m, n = divmod(row % nn, self.dim)
        return m, n, part

    def hamiltonian(self, x: Sequence[float]) -> np.ndarray:
        h = self.offset.copy()
        for c, e in zip(x, self.units):
            h = h + c * e
        return h


@dataclass(frozen=True)
class ConstraintSolution:
    """Affine family ``particular + span(basis)`` of chiral Hamiltonians."""

    particular: Hamiltonian
    basis: tuple[np.ndarray, ...]
    residual: float = 0.0

    @property
    def n_free(self) -> int:
        return len(self.basis)

    def distance(self, H: Hamiltonian | np.ndarray) -> float:
        """Frobenius distance from ``H`` to the affine family."""
        h = H.entries if isinstance(H, Hamiltonian) else np.asarray(H)
        d = h - self.particular.entries
        for b in self.basis:
            d = d - np.vdot(b, d).real * b
        return float(np.linalg.norm(d))


def _flatten(a: np.ndarray) -> np.ndarray:
    return np.concatenate([a.real.ravel(), a.imag.ravel()])


def assemble(template: HTemplate, sigma: SymmetryMatrix) -> LinearSystem:
    """Build the real linear system for the template's free parameters."""
    if template.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: template {template.dim} vs symmetry {sigma.dim}")
    s = np.asarray(sigma.entries)
    units = template.unit_matrices()
    offset = template.fixed_matrix()
    n_eq = 2 * template.dim ** 2
    matrix = np.zeros((n_eq, len(units)))
    for k, e in enumerate(units):
        matrix[:, k] = _flatten(chiral_map(e, s))
    rhs = -_flatten(chiral_map(offset, s))
    return LinearSystem(matrix, rhs, units, offset, template.dim)


def _canonical_sign(v: np.ndarray, tol: float) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


def solve(template: HTemplate, sigma: SymmetryMatrix, tol: float = CONSTRAINT_TOL) -> ConstraintSolution:
    """Solve for every template-compatible ``H`` with ``sigma`` as chiral symmetry.

    Raises :class:`InfeasibleError` when the least-squares residual exceeds
    ``tol``. The homogeneous basis comes from the SVD nullspace (relative
    cutoff ``tol``) and is orthonormal in the Frobenius inner product.
    """
    report = is_valid_symmetry(sigma)
    if not report.valid:
        raise ValueError(f"invalid symmetry matrix: {report}")
    system = assemble(template, sigma)
    a, b = system.matrix, system.rhs
    rank = 0
    vt = np.zeros((0, system.n_unknowns))
    x = np.zeros(system.n_unknowns)
    if system.n_unknowns:
        # rows (2 N^2) always outnumber unknowns (<= N^2), so the thin SVD keeps the nullspace
        u, s, vt = np.linalg.svd(a, full_matrices=False)
        rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
        x = vt[:rank].T @ ((u[:, :rank].T @ b) / s[:rank])
    resid = a @ x - b
    worst = int(np.argmax(np.abs(resid))) if resid.size else 0
    max_resid = float(np.abs(resid[worst])) if resid.size else 0.0
    if max_resid > tol:
        raise InfeasibleError(max_resid, worst, system.equation_entry(worst))
    basis = [system.hamiltonian(_canonical_sign(v, tol)) - system.offset for v in vt[rank:]]
    particular = Hamiltonian(system.hamiltonian(x))
    return ConstraintSolution(particular, tuple(basis), max_resid)


def sample(solution: ConstraintSolution, coefficients: Sequence[float]) -> Hamiltonian:
    """``particular + sum_i c_i basis_i``."""
    coefficients = np.asarray(coefficients, dtype=float).ravel()
    if coefficients.size != solution.n_free:
        raise ValueError(f"expected {solution.n_free} coefficients, got {coefficients.size}")
    h = np.array(solution.particular.entries)
    for c, b in zip(coefficients, solution.basis):
        h = h + c * b
    return Hamiltonian(h)
