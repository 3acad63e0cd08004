"""Core value types and their JSON (de)serialization.

All matrices are dense complex numpy arrays stored read-only. Energies are in
units of a reference hopping ``J``; the ``unit`` field in documents is carried
for bookkeeping only.

Document layouts::

    matrix   {"kind": ..., "dim": N, "entries": [[[re, im], ...], ...]}
    lattice  {"sites": [[x, y], ...], "drain": k, "edges": [[i, j], ...]}
    squeeze  {"r": ..., "phi": ..., "gamma": ...}
    moments  {"kind": "moments", "dim": N, "normal": [...], "anomalous": [...]}

Floats are written with 17 significant digits so that a load/save round trip
is bit exact.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO, Union

import numpy as np

HERMITIAN_TOL = 1e-12
MOMENT_TOL = 1e-10

PathOrStream = Union[str, Path, TextIO]


class FormatError(ValueError):
    """Malformed document: bad JSON, missing fields or inconsistent shapes."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _square(a: Any, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"{what} must be a non-empty square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class LatticeSpec:
    """Sites with integer coordinates, a drain site and the coupled pairs."""

    sites: tuple[tuple[int, ...], ...]
    drain: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        sites = tuple(tuple(int(c) for c in s) for s in self.sites)
        edges = tuple(tuple(sorted((int(i), int(j)))) for i, j in self.edges)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "edges", edges)
        if not sites:
            raise ValueError("lattice needs at least one site")
        dims = {len(s) for s in sites}
        if len(dims) != 1 or dims.pop() not in (1, 2):
            raise ValueError("site coordinates must all be 1- or 2-dimensional")
        if len(set(sites)) != len(sites):
            raise ValueError("site coordinates must be unique")
        if not 0 <= self.drain < len(sites):
            raise ValueError(f"drain index {self.drain} out of range for {len(sites)} sites")
        for i, j in edges:
            if i == j or not (0 <= i < len(sites) and 0 <= j < len(sites)):
                raise ValueError(f"edge ({i}, {j}) does not join two valid sites")

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def dim(self) -> int:
        return len(self.sites[0])

    def index(self, coord) -> int:
        return self.sites.index(tuple(coord))


@dataclass(frozen=True)
class Hamiltonian:
    """Hermitian single-particle matrix ``H`` of a quadratic lattice Hamiltonian.

    Inputs within ``HERMITIAN_TOL`` of Hermitian are symmetrized; anything
    further off is rejected.
    """

    entries: np.ndarray

    def __post_init__(self):
        h = _square(self.entries, "Hamiltonian")
        dev = float(np.max(np.abs(h - h.conj().T)))
        if dev > HERMITIAN_TOL:
            raise ValueError(f"matrix is not Hermitian (max |H - H^dagger| = {dev:.3e})")
        object.__setattr__(self, "entries", _frozen(0.5 * (h + h.conj().T)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SymmetryMatrix:
    """Candidate generalized chiral symmetry. Validity is checked separately."""

    entries: np.ndarray
    drain: int = 0

    def __post_init__(self):
        s = _square(self.entries, "symmetry matrix")
        if not 0 <= self.drain < s.shape[0]:
            raise ValueError(f"drain index {self.drain} out of range for dimension {s.shape[0]}")
        object.__setattr__(self, "entries", _frozen(s))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SqueezeParams:
    """Squeezed drain reservoir: squeezing ``r``, angle ``phi``, coupling ``gamma``."""

    r: float
    phi: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("r", "phi", "gamma"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.r < 0:
            raise ValueError("squeezing parameter r must be >= 0")
        if self.gamma <= 0:
            raise ValueError("drain coupling gamma must be > 0")


@dataclass(frozen=True)
class GaussianMoments:
    """Zero-mean Gaussian second moments.

    ``normal[m, n] = <a_n^dagger a_m>`` and ``anomalous[m, n] = <a_m a_n>``.
    """

    normal: np.ndarray
    anomalous: np.ndarray = field(default=None)

    def __post_init__(self):
        n = _square(self.normal, "normal moments")
        m = np.zeros_like(n) if self.anomalous is None else _square(self.anomalous, "anomalous moments")
        if m.shape != n.shape:
            raise ValueError(f"dimension mismatch: normal {n.shape} vs anomalous {m.shape}")
        herm = float(np.max(np.abs(n - n.conj().T)))
        if herm > MOMENT_TOL:
            raise ValueError(f"normal moments not Hermitian (deviation {herm:.3e})")
        lowest = float(np.linalg.eigvalsh(0.5 * (n + n.conj().T))[0])
        if lowest < -MOMENT_TOL:
            raise ValueError(f"normal moments not positive semidefinite (eigenvalue {lowest:.3e})")
        sym = float(np.max(np.abs(m - m.T)))
        if sym > MOMENT_TOL:
            raise ValueError(f"anomalous moments not symmetric (deviation {sym:.3e})")
        object.__setattr__(self, "normal", _frozen(n))
        object.__setattr__(self, "anomalous", _frozen(m))

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    @classmethod
    def vacuum(cls, dim: int) -> "GaussianMoments":
        z = np.zeros((dim, dim), dtype=complex)
        return cls(z, z)


# --------------------------------------------------------------------------
# serialization


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("non-finite values cannot be serialized")
    text = format(x, ".17g")
    if text in ("0", "-0"):
        return text + ".0"
    return text


def _dump(obj: Any, indent: int = 0) -> str:
    """JSON text with fixed float formatting; matrix rows stay on one line."""
    pad = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_dump(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not any(isinstance(v, (list, tuple, dict)) for v in obj):
            return _dump_flat(obj)
        if any(isinstance(v, dict) for v in obj):
            rows = [pad + "  " + _dump(v, indent + 1) for v in obj]
        else:
            rows = [pad + "  " + _dump_flat(v) for v in obj]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump_flat(obj: Any) -> str:
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dump_flat(v) for v in obj) + "]"
    return _dump(obj)


def _matrix_to_json(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def _matrix_from_json(entries: Any, dim: int | None, where: str) -> np.ndarray:
    if not isinstance(entries, list):
        raise FormatError(f"{where}: 'entries' must be a list of rows")
    n = len(entries)
    if dim is not None and dim != n:
        raise FormatError(f"{where}: dimension mismatch, dim = {dim} but {n} rows given")
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(entries):
        if not isinstance(row, list) or len(row) != n:
            raise FormatError(f"{where}: dimension mismatch, row {i} has "
                              f"{len(row) if isinstance(row, list) else 'no'} entries, expected {n}")
        for j, z in enumerate(row):
            try:
                re, im = z
                out[i, j] = complex(float(re), float(im))
            except (TypeError, ValueError):
                raise FormatError(f"{where}: entries[{i}][{j}] must be a [re, im] pair, got {z!r}") from None
    return out


def to_document(obj: Any) -> dict:
    """Plain-dict form of any core type (ready for JSON)."""
    if isinstance(obj, Hamiltonian):
        return {"kind": "hamiltonian", "unit": "J", "dim": obj.dim,
                "entries": _matrix_to_json(obj.entries)}
    if isinstance(obj, SymmetryMatrix):
        return {"kind": "symmetry", "dim": obj.dim, "drain": obj.drain,
                "entries": _matrix_to_json(obj.entries)}
    if isinstance(obj, LatticeSpec):
        return {"sites": [list(s) for s in obj.sites], "drain": obj.drain,
                "edges": [list(e) for e in obj.edges]}
    if isinstance(obj, SqueezeParams):
        return {"r": obj.r, "phi": obj.phi, "gamma": obj.gamma}
    if isinstance(obj, GaussianMoments):
        return {"kind": "moments", "dim": obj.dim, "normal": _matrix_to_json(obj.normal),
                "anomalous": _matrix_to_json(obj.anomalous)}
    to_doc = getattr(obj, "to_document", None)
    if to_doc is not None:
        return to_doc()
    raise TypeError(f"no document form for {type(obj).__name__}")


def _require(doc: dict, key: str, where: str) -> Any:
    if key not in doc:
        raise FormatError(f"{where}: missing field {key!r}")
    return doc[key]


def _int(value: Any, key: str, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError(f"{where}: field {key!r} must be an integer, got {value!r}")
    return value


def infer_kind(doc: dict) -> str:
    if "kind" in doc:
        return str(doc["kind"])
    if "sites" in doc:
        return "lattice"
    if "r" in doc and "gamma" in doc:
        return "squeeze"
    if "normal" in doc:
        return "moments"
    if "entries" in doc and isinstance(doc["entries"], list) and doc["entries"] \
            and isinstance(doc["entries"][0], dict):
        return "template"
    if "drain" in doc:
        return "symmetry"
    return "hamiltonian"


def from_document(doc: Any, kind: str | None = None, where: str = "<document>") -> Any:
    """Build a core value from its plain-dict form.

    ``kind`` is one of ``hamiltonian``, ``symmetry``, ``lattice``, ``squeeze``,
    ``moments`` or ``template``; it is inferred from the fields if omitted.
    """
    if not isinstance(doc, dict):
        raise FormatError(f"{where}: top level must be a JSON object")
    kind = kind or infer_kind(doc)
    try:
        if kind == "hamiltonian":
            dim = _int(_require(doc, "dim", where), "dim", where)
            return Hamiltonian(_matrix_from_json(_require(doc, "entries", where), dim, where))
        if kind == "symmetry":
            dim = _int(_require(doc, "dim", where), "dim", where)
            drain = _int(doc.get("drain", 0), "drain", where)
            return SymmetryMatrix(_matrix_from_json(_require(doc, "entries", where), dim, where), drain)
        if kind == "lattice":
            sites = _require(doc, "sites", where)
            edges = doc.get("edges", [])
            if not isinstance(sites, list) or not all(isinstance(s, list) for s in sites):
                raise FormatError(f"{where}: 'sites' must be a list of coordinate lists")
            if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 2 for e in edges):
                raise FormatError(f"{where}: 'edges' must be a list of index pairs")
            drain = _int(_require(doc, "drain", where), "drain", where)
            return LatticeSpec(tuple(tuple(s) for s in sites), drain, tuple(tuple(e) for e in edges))
        if kind == "squeeze":
            return SqueezeParams(float(_require(doc, "r", where)), float(doc.get("phi", 0.0)),
                                 float(doc.get("gamma", 1.0)))
        if kind == "moments":
            dim = doc.get("dim")
            normal = _matrix_from_json(_require(doc, "normal", where), dim, where + " normal")
            anomalous = _matrix_from_json(_require(doc, "anomalous", where), dim, where + " anomalous")
            return GaussianMoments(normal, anomalous)
        if kind == "template":
            from .constraints import HTemplate
            return HTemplate.from_document(doc, where)
    except FormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc
    raise FormatError(f"{where}: unknown document kind {kind!r}")


def dumps(obj: Any) -> str:
    return _dump(to_document(obj)) + "\n"


def loads(text: str, kind: str | None = None, where: str = "<string>") -> Any:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{where}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return from_document(doc, kind, where)


def save(obj: Any, target: PathOrStream) -> None:
    """Write ``obj`` as a JSON document to a path or open text stream."""
    text = dumps(obj)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)


def load(source: PathOrStream, kind: str | None = None) -> Any:
    """Read a JSON document from a path or stream; see :func:`from_document`."""
    if isinstance(source, (str, Path)):
        where = str(source)
        text = Path(source).read_text()
    else:
        where = getattr(source, "name", "<stream>")
        text = source.read()
    return loads(text, kind, where)


def roundtrip(obj: Any) -> Any:
    buf = io.StringIO()
    save(obj, buf)
    buf.seek(0)
    return load(buf)
