"""Closed-form builders for the four-fold lattice and the heralding chain.

Four-fold lattice
    Square ``(2L+1) x (2L+1)`` grid, drain at the origin, on-site potentials
    and nearest-neighbour hopping ``H[m, n] = V_n delta_mn - J_mn``. Only the
    quadrant-1 parameters are free; the rest follows from the rotation rules

        V_{R n} = -V_n,    J_{Rm, Rn} = i^(q_m - q_n) conj(J_mn),

    with the drain potential zero and the drain's x-couplings fixed by its
    y-couplings.

Heralding chain
    Sites ``-L..L``: a heralding set of isolated sites (``n < 0``), the drain
    (``n = 0``) and a nearest-neighbour chain (``n > 0``). Matrix index of
    site ``n`` is ``n + L``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .constraints import HTemplate, Tag
from .model import Hamiltonian, LatticeSpec, SymmetryMatrix

Coord = tuple[int, int]
Potential = Union[Callable[[Coord], float], Mapping[Coord, float], None]

# symmetric unitary 4x4 block coupling the four members of a rotation orbit
ORBIT_BLOCK = np.array([[0, 1, 0, -1j],
                        [1, 0, 1j, 0],
                        [0, 1j, 0, -1],
                        [-1j, 0, -1, 0]], dtype=complex)

ORIGIN = (0, 0)


def quadrant(coord: Coord) -> int:
    """Quadrant label 1-4 of a nonzero site, half-open so axes are shared out."""
    x, y = coord
    if x > 0 and y >= 0:
        return 1
    if x <= 0 and y > 0:
        return 2
    if x < 0 and y <= 0:
        return 3
    if x >= 0 and y < 0:
        return 4
    raise ValueError("the origin has no quadrant")


def rotate(coord: Coord, times: int = 1) -> Coord:
    """Rotate a lattice vector by ``times`` quarter turns counter-clockwise."""
    x, y = coord
    for _ in range(times % 4):
        x, y = -y, x
    return (x, y)


def fourfold_lattice(L: int) -> LatticeSpec:
    """Sites of the ``(2L+1)^2`` square grid, x-major, with all NN bonds."""
    if L < 1:
        raise ValueError("L must be >= 1")
    sites = list(itertools.product(range(-L, L + 1), repeat=2))
    index = {s: i for i, s in enumerate(sites)}
    edges = [(index[s], index[(s[0] + dx, s[1] + dy)])
             for s in sites for dx, dy in ((1, 0), (0, 1)) if (s[0] + dx, s[1] + dy) in index]
    return LatticeSpec(tuple(sites), index[ORIGIN], tuple(edges))


def fourfold_sigma(L: int) -> SymmetryMatrix:
    """Block-diagonal symmetry pairing each site with its three rotation images.

    Within an orbit the entry is ``ORBIT_BLOCK[q_m, q_n] * (-1)^(|x|+|y|) / sqrt(2)``.
    The sign is a parity factor; the ``1/sqrt(2)`` is what makes each block
    unitary.
    """
    lat = fourfold_lattice(L)
    n = lat.n_sites
    s = np.zeros((n, n), dtype=complex)
    s[lat.drain, lat.drain] = 1.0
    for i, m in enumerate(lat.sites):
        if m == ORIGIN:
            continue
        parity = (-1) ** (abs(m[0]) + abs(m[1])) / np.sqrt(2)
        for l in range(4):
            other = rotate(m, l)
            s[i, lat.index(other)] = ORBIT_BLOCK[quadrant(m) - 1, quadrant(other) - 1] * parity
    return SymmetryMatrix(s, lat.drain)


def _bond_orbit(m: Coord, n: Coord, value: complex) -> list[tuple[Coord, Coord, complex]]:
    out = [(m, n, complex(value))]
    for _ in range(3):
        m0, n0, v0 = out[-1]
        out.append((rotate(m0), rotate(n0), 1j ** (quadrant(m0) - quadrant(n0)) * np.conj(v0)))
    return out


def representative_bonds(L: int) -> list[tuple[Coord, Coord]]:
    """One ordered bond per rotation orbit of non-drain NN bonds.

    The representative lies inside quadrant 1 or crosses from quadrant 1 into
    quadrant 2.
    """
    lat = fourfold_lattice(L)
    reps = []
    for i, j in lat.edges:
        m, n = lat.sites[i], lat.sites[j]
        if ORIGIN in (m, n):
            continue
        qs = sorted((quadrant(m), quadrant(n)))
        if qs in ([1, 1], [1, 2]):
            reps.append((m, n) if quadrant(m) <= quadrant(n) else (n, m))
    return reps


def drain_x_couplings(j_up: complex, j_down: complex) -> tuple[complex, complex]:
    """Drain hoppings to ``(+1, 0)`` and ``(-1, 0)`` from those to ``(0, +1)``, ``(0, -1)``."""
    j_right = (np.conj(j_up) + 1j * np.conj(j_down)) / np.sqrt(2)
    j_left = -(np.conj(j_down) + 1j * np.conj(j_up)) / np.sqrt(2)
    return complex(j_right), complex(j_left)


def _quadrant1_potentials(L: int, potential: Potential) -> dict[Coord, float]:
    q1 = [s for s in fourfold_lattice(L).sites if s != ORIGIN and quadrant(s) == 1]
    if potential is None:
        return {s: 0.0 for s in q1}
    if callable(potential):
        return {s: float(potential(s)) for s in q1}
    return {s: float(potential.get(s, 0.0)) for s in q1}


def fourfold_hamiltonian(L: int, potential: Potential, hoppings: Mapping[tuple[Coord, Coord], complex],
                         drain_couplings: tuple[complex, complex],
                         uniform: float | None = None) -> Hamiltonian:
    """Extend quadrant-1 parameters to the full chiral four-fold Hamiltonian.

    Parameters
    ----------
    potential:
        Quadrant-1 on-site potentials, as a function of the site or a mapping.
        Values outside quadrant 1 are ignored and generated by rotation.
    hoppings:
        ``J_mn`` for each bond in :func:`representative_bonds` (ordered pair as
        returned there). Missing bonds are left uncoupled.
    drain_couplings:
        ``(J_{0,(0,1)}, J_{0,(0,-1)})``; the x-couplings follow from these.
    uniform:
        If given, every hopping magnitude must equal it. Drain couplings that
        cannot reach that magnitude raise ``ValueError``.
    """
    lat = fourfold_lattice(L)
    h = np.zeros((lat.n_sites, lat.n_sites), dtype=complex)
    for site, v in _quadrant1_potentials(L, potential).items():
        for k in range(4):
            i = lat.index(rotate(site, k))
            h[i, i] = (-1) ** k * v

    def put(m: Coord, n: Coord, j: complex) -> None:
        a, b = lat.index(m), lat.index(n)
        h[a, b] = -j
        h[b, a] = -np.conj(j)

    reps = set(representative_bonds(L))
    for (m, n), j in hoppings.items():
        if (m, n) not in reps:
            if (n, m) in reps:
                m, n, j = n, m, np.conj(j)
            else:
                raise ValueError(f"bond {m}-{n} is not a representative bond")
        for mm, nn, jj in _bond_orbit(m, n, j):
            put(mm, nn, jj)

    j_up, j_down = complex(drain_couplings[0]), complex(drain_couplings[1])
    j_right, j_left = drain_x_couplings(j_up, j_down)
    for target, j in (((0, 1), j_up), ((0, -1), j_down), ((1, 0), j_right), ((-1, 0), j_left)):
        put(ORIGIN, target, j)

    if uniform is not None:
        off = h[~np.eye(lat.n_sites, dtype=bool)]
        mags = np.abs(off[off != 0])
        if abs(abs(j_right) - uniform) > 1e-12 or abs(abs(j_left) - uniform) > 1e-12:
            raise ValueError(
                f"drain couplings {j_up:.6g}, {j_down:.6g} give x-coupling magnitudes "
                f"{abs(j_right):.6g}, {abs(j_left):.6g}; uniform |J| = {uniform:.6g} needs the two "
                f"y-couplings equal up to sign (achievable magnitude here: {abs(j_right):.6g})")
        if mags.size and np.max(np.abs(mags - uniform)) > 1e-12:
            raise ValueError(f"hopping magnitudes range over [{mags.min():.6g}, {mags.max():.6g}], "
                             f"not uniform {uniform:.6g}")
    return Hamiltonian(h)


# --------------------------------------------------------------------------
# plaquette fluxes


@dataclass(frozen=True, order=True)
class PlaquetteId:
    """Unit square with lower-left corner ``corner``; its center is ``corner + (1/2, 1/2)``."""

    corner: Coord

    @property
    def center(self) -> tuple[float, float]:
        return (self.corner[0] + 0.5, self.corner[1] + 0.5)

    @property
    def loop(self) -> tuple[Coord, Coord, Coord, Coord]:
        x, y = self.corner
        return ((x, y), (x, y + 1), (x + 1, y + 1), (x + 1, y))

    def rotated(self, times: int = 1) -> "PlaquetteId":
        x, y = self.corner
        for _ in range(times % 4):
            x, y = -y - 1, x
        return PlaquetteId((x, y))

    @property
    def is_central(self) -> bool:
        return self.corner in ((0, 0), (-1, 0), (-1, -1), (0, -1))


CENTRAL_PLAQUETTES = tuple(PlaquetteId(c) for c in ((0, 0), (-1, 0), (-1, -1), (0, -1)))


def plaquettes(L: int) -> list[PlaquetteId]:
    return [PlaquetteId((x, y)) for x in range(-L, L) for y in range(-L, L)]


def quadrant1_plaquettes(L: int) -> list[PlaquetteId]:
    """Outer plaquettes with center in the open first quadrant, one per rotation orbit."""
    return [p for p in plaquettes(L) if p.corner[0] >= 0 and p.corner[1] >= 0 and not p.is_central]


def plaquette_flux(H: Hamiltonian | np.ndarray, p: PlaquetteId | Coord, lattice: LatticeSpec) -> float:
    """Phase of ``J_{n,n+y} J_{n+y,n+x+y} J_{n+x+y,n+x} J_{n+x,n}`` with ``J = -H``.

    Gauge invariant; in ``(-pi, pi]``.
    """
    p = p if isinstance(p, PlaquetteId) else PlaquetteId(tuple(p))
    h = H.entries if isinstance(H, Hamiltonian) else np.asarray(H)
    corners = p.loop
    try:
        idx = [lattice.index(c) for c in corners]
    except ValueError:
        raise ValueError(f"plaquette {p.center} is not inside the lattice") from None
    product = 1.0 + 0j
    for a, b in zip(idx, idx[1:] + idx[:1]):
        j = -h[a, b]
        if j == 0:
            raise ValueError(f"zero hopping between {lattice.sites[a]} and {lattice.sites[b]}: "
                             f"flux through {p.center} undefined")
        product *= j
    phi = float(np.angle(product))
    return np.pi if phi <= -np.pi else phi


def flux_table(H: Hamiltonian, L: int) -> list[tuple[float, float, float]]:
    """``(px, py, flux)`` for every plaquette, ordered by corner."""
    lat = fourfold_lattice(L)
    return [(*p.center, plaquette_flux(H, p, lat)) for p in plaquettes(L)]


def wrap(angle: float | np.ndarray) -> float | np.ndarray:
    """Map angles to ``(-pi, pi]``."""
    w = -np.mod(-np.asarray(angle) + np.pi, 2 * np.pi) + np.pi
    return float(w) if np.ndim(w) == 0 else w


def central_flux_family(alpha: float, branch: int = 1) -> tuple[float, float, float, float]:
    """Central fluxes reachable with uniform hopping magnitude.

    With every ``|J|`` equal, the drain's y-couplings must be equal
    (``branch=1``) or opposite (``branch=-1``), which pins
    ``Phi_2 = -branch*pi/2 - Phi_1``, ``Phi_3 = Phi_1 + pi``, ``Phi_4 = Phi_2 + pi``.
    """
    f1 = alpha
    f2 = -branch * np.pi / 2 - alpha
    return tuple(float(wrap(f)) for f in (f1, f2, f1 + np.pi, f2 + np.pi))


DEFAULT_CENTRAL_FLUXES = central_flux_family(-np.pi / 4, 1)


def fourfold_from_fluxes(L: int, potential: Potential = None, hopping: float = 1.0,
                         quadrant_flux: float | Mapping[Coord, float] = np.pi / 2,
                         central_fluxes: Sequence[float] = DEFAULT_CENTRAL_FLUXES) -> Hamiltonian:
    """Uniform-|J| four-fold lattice with prescribed plaquette fluxes.

    ``quadrant_flux`` sets the flux of each outer quadrant-1 plaquette (scalar,
    or mapping from plaquette corner); the other outer fluxes alternate sign
    under rotation. ``central_fluxes`` are for the plaquettes with corners
    (0,0), (-1,0), (-1,-1), (0,-1); they must sum to pi and, for uniform
    hopping, belong to :func:`central_flux_family`.
    """
    central_fluxes = [float(f) for f in central_fluxes]
    if len(central_fluxes) != 4:
        raise ValueError("need exactly four central fluxes")
    if abs(wrap(sum(central_fluxes) - np.pi)) > 1e-12:
        raise ValueError(f"central fluxes must sum to pi (mod 2 pi), got {sum(central_fluxes):.12g}")
    outer = quadrant1_plaquettes(L)
    if isinstance(quadrant_flux, Mapping):
        targets = [float(quadrant_flux[p.corner]) for p in outer]
    else:
        targets = [float(quadrant_flux)] * len(outer)
    hops, drain = _flux_gauge(L, float(hopping), tuple(targets + central_fluxes))
    return fourfold_hamiltonian(L, potential, dict(hops), drain, uniform=hopping)


@functools.lru_cache(maxsize=64)
def _flux_gauge(L: int, hopping: float, targets: tuple[float, ...]):
    """Representative-bond and drain couplings realizing the target fluxes."""
    lat = fourfold_lattice(L)
    reps = representative_bonds(L)
    controlled = quadrant1_plaquettes(L) + list(CENTRAL_PLAQUETTES)
    targets = np.array(targets)

    def params(theta: np.ndarray, branch: int):
        hops = tuple((b, hopping * np.exp(1j * t)) for b, t in zip(reps, theta[:-1]))
        d = hopping * np.exp(1j * theta[-1])
        return hops, (d, branch * d)

    def fluxes(theta: np.ndarray, branch: int) -> np.ndarray:
        hops, drain = params(theta, branch)
        h = fourfold_hamiltonian(L, None, dict(hops), drain)
        return np.array([plaquette_flux(h, p, lat) for p in controlled])

    n_par = len(reps) + 1
    step = 0.25
    for branch in (1, -1):
        # fluxes are affine in the phases mod 2 pi with small integer coefficients
        base = fluxes(np.zeros(n_par), branch)
        coeff = np.empty((len(controlled), n_par))
        for k in range(n_par):
            e = np.zeros(n_par)
            e[k] = step
            coeff[:, k] = np.round(wrap(fluxes(e, branch) - base) / step)
        # dependent rows can disagree by 2 pi after wrapping; solve on independent ones only
        rows: list[int] = []
        for i in range(len(controlled)):
            if np.linalg.matrix_rank(coeff[rows + [i]]) > len(rows):
                rows.append(i)
        theta = np.linalg.lstsq(coeff[rows], wrap(targets - base)[rows], rcond=None)[0]
        if np.max(np.abs(wrap(fluxes(theta, branch) - targets))) < 1e-9:
            return params(theta, branch)
    raise ValueError(
        "fluxes not reachable with uniform hopping: central fluxes must satisfy "
        "Phi_3 = Phi_1 + pi, Phi_4 = Phi_2 + pi and Phi_1 + Phi_2 = +-pi/2 (mod 2 pi); "
        f"got {[round(f, 6) for f in targets[-4:]]}")


def alternating_potential(strength: float) -> Callable[[Coord], float]:
    """``V_n = (-1)^(q_n) * strength``."""
    return lambda s: (-1) ** quadrant(s) * strength


def saddle_potential(strength: float, L: int) -> Callable[[Coord], float]:
    """``V_n = strength * x * y / L^2``; odd under a quarter turn."""
    return lambda s: strength * s[0] * s[1] / L**2


def fourfold_exemplar(L: int = 2, strength: float = 0.5) -> Hamiltonian:
    """Uniform |J| = 1, quadrant fluxes pi/2, default central fluxes, ``V_n = (-1)^q J/2``."""
    return fourfold_from_fluxes(L, alternating_potential(strength))


def fourfold_template(L: int) -> HTemplate:
    """Free real potentials and free complex NN hoppings; everything else zero."""
    lat = fourfold_lattice(L)
    return HTemplate.free_on(lat.n_sites, range(lat.n_sites), lat.edges)


# --------------------------------------------------------------------------
# heralding chain


def sine_transform(L: int) -> np.ndarray:
    """Orthogonal, symmetric chain eigenbasis ``sqrt(2/(L+1)) sin(pi k n / (L+1))``."""
    k = np.arange(1, L + 1)
    return np.sqrt(2.0 / (L + 1)) * np.sin(np.pi * np.outer(k, k) / (L + 1))


def herald_lattice(L: int, H: Hamiltonian | None = None) -> LatticeSpec:
    """1D sites ``-L..L``; edges are the nonzero couplings of ``H`` if given."""
    if L < 1:
        raise ValueError("L must be >= 1")
    sites = tuple((n,) for n in range(-L, L + 1))
    if H is None:
        edges = [(i, i + 1) for i in range(L + 1, 2 * L)] + [(L, i) for i in range(2 * L + 1) if i != L]
    else:
        h = H.entries
        edges = [(i, j) for i in range(h.shape[0]) for j in range(i + 1, h.shape[0]) if h[i, j] != 0]
    return LatticeSpec(sites, L, tuple(edges))


def herald_sigma(L: int) -> SymmetryMatrix:
    """``sigma[m, n] = sqrt(2/(L+1)) sin(pi m n/(L+1))`` for ``sign(m) = -sign(n)``; 1 at the drain."""
    if L < 1:
        raise ValueError("L must be >= 1")
    n = np.arange(-L, L + 1)
    s = np.sqrt(2.0 / (L + 1)) * np.sin(np.pi * np.outer(n, n) / (L + 1))
    s[np.sign(n)[:, None] != -np.sign(n)[None, :]] = 0.0
    s[L, L] = 1.0
    return SymmetryMatrix(s.astype(complex), L)


def herald_hamiltonian(L: int, V: float, J: float = 1.0,
                       drain_couplings: Sequence[complex] | complex | None = None) -> Hamiltonian:
    """Chain A with potential ``V`` and hopping ``J``, heralding sites B, drain at 0.

    B sites carry ``2 J cos(pi m/(L+1)) - V`` and are not coupled to A.
    ``drain_couplings`` gives ``H[0, -n]`` for ``n = 1..L`` (scalar broadcasts;
    default ``-J``). The drain-to-A row is then ``conj(H[0, B]) @ S`` with
    ``S`` the chain's sine transform.
    """
    if J <= 0:
        raise ValueError("J must be > 0")
    if drain_couplings is None:
        drain_couplings = -J
    c = np.broadcast_to(np.asarray(drain_couplings, dtype=complex), (L,)).copy()
    size = 2 * L + 1
    h = np.zeros((size, size), dtype=complex)
    a = np.arange(L + 1, size)          # sites 1..L
    b = L - np.arange(1, L + 1)         # sites -1..-L
    h[a, a] = V
    h[a[:-1], a[1:]] = -J
    h[a[1:], a[:-1]] = -J
    m = np.arange(1, L + 1)
    h[b, b] = 2 * J * np.cos(np.pi * m / (L + 1)) - V
    h[L, b] = c
    h[b, L] = c.conj()
    to_a = c.conj() @ sine_transform(L)
    h[L, a] = to_a
    h[a, L] = to_a.conj()
    return Hamiltonian(h)


def herald_template(L: int, V: float, J: float = 1.0) -> HTemplate:
    """Chain A fixed; drain potential, B block, A-B block and drain row left free."""
    size = 2 * L + 1
    a = list(range(L + 1, size))
    tags: dict = {}
    for i in range(size):
        for j in range(i, size):
            if i in a and j in a:
                if i == j:
                    tags[(i, j)] = (Tag.FIXED, V)
                elif j == i + 1:
                    tags[(i, j)] = (Tag.FIXED, -J)
            else:
                tags[(i, j)] = Tag.FREE_REAL if i == j else Tag.FREE_COMPLEX
    return HTemplate(size, tags)
