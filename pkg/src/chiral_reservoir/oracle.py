"""Second-moment dynamics of the lattice with a squeezed drain.

With ``L = cosh r a_0 - e^{i phi} sinh r a_0^dagger`` as the jump operator at
rate ``gamma`` and drift ``A = iH + (gamma/2) P_0`` (``P_0`` projects on the
drain), the moments obey

    dN/dt = -(A N + N A^dagger) + gamma sinh^2 r           E_00
    dM/dt = -(A M + M A^T)      + gamma e^{i phi} sinh r cosh r E_00

with ``N[m, n] = <a_n^dagger a_m>``, ``M[m, n] = <a_m a_n>``. First moments
decay on their own (``d<a>/dt = -A <a>``) and are not tracked.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, solve_continuous_lyapunov, solve_sylvester

from .chiral import purity_deviation
from .model import GaussianMoments, Hamiltonian, SqueezeParams

FIXED_POINT_TOL = 1e-10


class NonRelaxingError(RuntimeError):
    """The moment flow has no unique attracting fixed point."""

    def __init__(self, smallest: float):
        self.smallest = smallest
        super().__init__("non-relaxing: dark mode or degeneracy suspected "
                         f"(smallest decay rate of the moment flow {smallest:.3e})")


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MomentGenerator:
    H: Hamiltonian
    drain: int
    squeeze: SqueezeParams

    def __post_init__(self):
        if not 0 <= self.drain < self.H.dim:
            raise ValueError(f"drain index {self.drain} out of range for dimension {self.H.dim}")

    @property
    def dim(self) -> int:
        return self.H.dim

    @property
    def drift(self) -> np.ndarray:
        a = 1j * np.asarray(self.H.entries)
        a[self.drain, self.drain] += 0.5 * self.squeeze.gamma
        return a

    @property
    def normal_source(self) -> np.ndarray:
        q = np.zeros((self.dim, self.dim), dtype=complex)
        q[self.drain, self.drain] = self.squeeze.gamma * np.sinh(self.squeeze.r) ** 2
        return q

    @property
    def anomalous_source(self) -> np.ndarray:
        sq = self.squeeze
        q = np.zeros((self.dim, self.dim), dtype=complex)
        q[self.drain, self.drain] = sq.gamma * np.exp(1j * sq.phi) * np.sinh(sq.r) * np.cosh(sq.r)
        return q

    def derivative(self, normal: np.ndarray, anomalous: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = self.drift
        dn = -(a @ normal + normal @ a.conj().T) + self.normal_source
        dm = -(a @ anomalous + anomalous @ a.T) + self.anomalous_source
        return dn, dm

    def __call__(self, g: GaussianMoments) -> tuple[np.ndarray, np.ndarray]:
        return self.derivative(np.asarray(g.normal), np.asarray(g.anomalous))

    def residual(self, g: GaussianMoments) -> float:
        dn, dm = self(g)
        return float(max(np.max(np.abs(dn)), np.max(np.abs(dm))))

    def decay_rates(self) -> np.ndarray:
        """Real parts of the drift eigenvalues, ascending."""
        return np.sort(np.linalg.eigvals(self.drift).real)


def generator(H: Hamiltonian, n0: int, sq: SqueezeParams) -> MomentGenerator:
    return MomentGenerator(H, n0, sq)


def _pack(normal: np.ndarray, anomalous: np.ndarray) -> np.ndarray:
    return np.concatenate([normal.ravel(), anomalous.ravel()]).view(float)


def _unpack(y: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
    z = y.view(complex)
    nn = dim * dim
    return z[:nn].reshape(dim, dim), z[nn:].reshape(dim, dim)


def _integrate(g0: GaussianMoments, gen: MomentGenerator, times: np.ndarray,
               rtol: float, atol: float) -> list[GaussianMoments]:
    dim = gen.dim
    if g0.dim != dim:
        raise ValueError(f"dimension mismatch: moments {g0.dim} vs generator {dim}")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    if times.size == 0:
        return []
    if times[-1] == 0:
        return [g0 for _ in times]

    def rhs(_t, y):
        n, m = _unpack(y, dim)
        dn, dm = gen.derivative(n, m)
        return _pack(dn, dm)

    sol = solve_ivp(rhs, (0.0, times[-1]), _pack(np.array(g0.normal), np.array(g0.anomalous)),
                    method="DOP853", t_eval=times, rtol=rtol, atol=atol)
    if sol.status != 0:
        rates = gen.decay_rates()
        reached = float(np.atleast_1d(sol.t)[-1]) if np.size(sol.t) else 0.0
        raise IntegrationError(f"integration failed at t = {reached:.6g}: "
                               f"{sol.message} (drift decay rates span {rates[0]:.3e}..{rates[-1]:.3e}, "
                               f"|H|max = {np.max(np.abs(gen.H.entries)):.3e})")
    return [GaussianMoments(*_unpack(np.ascontiguousarray(y), dim)) for y in sol.y.T]


def evolve(g0: GaussianMoments, gen: MomentGenerator, t: float,
           rtol: float = 1e-10, atol: float = 1e-12) -> GaussianMoments:
    """Integrate the moment flow for a duration ``t`` (adaptive 8th-order Runge-Kutta)."""
    if t < 0:
        raise ValueError("duration must be >= 0")
    return _integrate(g0, gen, np.array([t]), rtol, atol)[0]


def trajectory(g0: GaussianMoments, gen: MomentGenerator, times: Sequence[float],
               rtol: float = 1e-10, atol: float = 1e-12) -> list[GaussianMoments]:
    return _integrate(g0, gen, np.asarray(times, dtype=float), rtol, atol)


def steady_moments(gen: MomentGenerator, tol: float = FIXED_POINT_TOL) -> GaussianMoments:
    """Unique fixed point of the moment flow by direct Lyapunov/Sylvester solves.

    Raises :class:`NonRelaxingError` when the drift has an eigenvalue on the
    imaginary axis (a dark mode), in which case no unique fixed point exists.
    """
    a = gen.drift
    rates = gen.decay_rates()
    scale = max(1.0, float(np.max(np.abs(a))))
    # the Lyapunov operator's smallest eigenvalue magnitude is 2 * min Re(eig A)
    smallest = 2 * float(rates[0])
    if smallest <= 1e-12 * scale:
        raise NonRelaxingError(smallest)
    normal = solve_continuous_lyapunov(a, gen.normal_source)
    anomalous = solve_sylvester(a, a.T, gen.anomalous_source)
    g = GaussianMoments(0.5 * (normal + normal.conj().T), 0.5 * (anomalous + anomalous.T))
    res = gen.residual(g)
    if res > tol:
        if smallest < 1e-8 * scale:
            # nearly dark: the solve is ill-conditioned rather than wrong
            raise NonRelaxingError(smallest)
        raise IntegrationError(f"fixed-point residual {res:.3e} exceeds {tol:.1e}")
    return g


def moment_distance(a: GaussianMoments, b: GaussianMoments) -> float:
    """Largest entrywise difference between the normal or anomalous parts."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(max(np.max(np.abs(a.normal - b.normal)), np.max(np.abs(a.anomalous - b.anomalous))))


@dataclass(frozen=True)
class TraceRow:
    t: float
    distance: float
    purity: float


def distance_trace(g0: GaussianMoments, gen: MomentGenerator, times: Sequence[float],
                   reference: GaussianMoments) -> list[TraceRow]:
    """Distance to ``reference`` and purity deviation along a trajectory."""
    return [TraceRow(float(t), moment_distance(g, reference), purity_deviation(g))
            for t, g in zip(times, trajectory(g0, gen, times))]


def trace_csv(rows: Sequence[TraceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "max_distance_to_prediction", "purity_deviation"])
    for row in rows:
        w.writerow([format(row.t, ".17g"), format(row.distance, ".17g"), format(row.purity, ".17g")])
    return buf.getvalue()


def propagate(g0: GaussianMoments, gen: MomentGenerator, t: float,
              fixed_point: GaussianMoments | None = None) -> GaussianMoments:
    """Closed-form flow of a relaxing generator.

    The deviation from the fixed point evolves as ``P D P^dagger`` (normal)
    and ``P D P^T`` (anomalous) with ``P = exp(-A t)``. Exact up to rounding
    for any ``t``, which makes it the tool of choice for long horizons where
    :func:`evolve` would need millions of steps.
    """
    if t < 0:
        raise ValueError("duration must be >= 0")
    if g0.dim != gen.dim:
        raise ValueError(f"dimension mismatch: moments {g0.dim} vs generator {gen.dim}")
    ss = steady_moments(gen) if fixed_point is None else fixed_point
    p = expm(-gen.drift * t)
    dn = p @ (g0.normal - ss.normal) @ p.conj().T
    dm = p @ (g0.anomalous - ss.anomalous) @ p.T
    n = ss.normal + 0.5 * (dn + dn.conj().T)
    return GaussianMoments(n, ss.anomalous + 0.5 * (dm + dm.T))


def relaxation_time(gen: MomentGenerator, tol: float = 1e-6, g0: GaussianMoments | None = None,
                    t_max: float = 1e7, reference: GaussianMoments | None = None) -> float:
    """First time at which the trajectory from ``g0`` (vacuum) is within ``tol`` of ``reference``.

    ``reference`` defaults to the fixed point. The trajectory is sampled with
    the exact propagator every 1/20 of the slowest relaxation time and the
    first crossing is then located by bisection to a relative precision of
    ``1e-6``. Returns ``inf`` if ``t_max`` is reached first.
    """
    g0 = GaussianMoments.vacuum(gen.dim) if g0 is None else g0
    ss = steady_moments(gen)
    reference = ss if reference is None else reference
    if moment_distance(g0, reference) <= tol:
        return 0.0
    dt = min(1.0 / (20 * float(gen.decay_rates()[0])), t_max)
    step = expm(-gen.drift * dt)
    dn, dm = g0.normal - ss.normal, g0.anomalous - ss.anomalous
    offset_n, offset_m = ss.normal - reference.normal, ss.anomalous - reference.anomalous

    def distance(n, m):
        return float(max(np.max(np.abs(n + offset_n)), np.max(np.abs(m + offset_m))))

    t = 0.0
    while t < t_max:
        dn, dm = step @ dn @ step.conj().T, step @ dm @ step.T
        t += dt
        if distance(dn, dm) <= tol:
            break
    else:
        return float("inf")
    lo, hi = t - dt, t
    while hi - lo > 1e-6 * hi:
        mid = 0.5 * (lo + hi)
        g = propagate(g0, gen, mid, ss)
        if moment_distance(g, reference) <= tol:
            hi = mid
        else:
            lo = mid
    return hi
