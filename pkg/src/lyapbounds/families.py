"""Seedable specifications of stationary matrix sequences.

Two sampling kinds are supported: finite-support i.i.d. draws and
deterministic periodic schedules.  Streams are counter-based (Philox keyed
by ``(seed, replica)``), so every replica is an independent stream and any
``(family, seed, replica, n)`` tuple reproduces bit-identical samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingularSample, ValidationError
from .linalg import as_matrix
from .shapes import ShapeSet, decompose

FINITE_IID = "finite_iid"
SCHEDULE = "schedule"
PROB_SUM_TOL = 1e-12


@dataclass
class MatrixFamily:
    dim: int
    kind: str
    atoms: tuple[np.ndarray, ...]
    probs: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (FINITE_IID, SCHEDULE):
            raise ValidationError(f"unknown family kind {self.kind!r}")
        if not self.atoms:
            raise ValidationError("family needs at least one atom")
        self.atoms = tuple(as_matrix(a, self.dim) for a in self.atoms)
        if self.kind == FINITE_IID:
            if self.probs is None or len(self.probs) != len(self.atoms):
                raise ValidationError("finite_iid needs one probability per atom")
            self.probs = tuple(float(p) for p in self.probs)
            if any(p <= 0 for p in self.probs):
                raise ValidationError("probabilities must be positive")
            if abs(sum(self.probs) - 1.0) > PROB_SUM_TOL:
                raise ValidationError(f"probabilities sum to {sum(self.probs)}, not 1")
        else:
            self.probs = None

    @property
    def deterministic(self) -> bool:
        return self.kind == SCHEDULE or len(self.atoms) == 1

    def to_json_dict(self) -> dict:
        doc = {
            "dim": self.dim,
            "kind": self.kind,
            "atoms": [a.tolist() for a in self.atoms],
            "seed": self.seed,
        }
        if self.probs is not None:
            doc["probs"] = list(self.probs)
        return doc

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MatrixFamily":
        return cls(
            dim=int(obj["dim"]),
            kind=str(obj["kind"]),
            atoms=tuple(np.asarray(a, dtype=float) for a in obj["atoms"]),
            probs=tuple(obj["probs"]) if obj.get("probs") is not None else None,
            seed=int(obj.get("seed", 0)),
        )


def finite_iid(atoms, probs, dim=None, seed=0) -> MatrixFamily:
    atoms = tuple(np.asarray(a, dtype=float) for a in atoms)
    dim = atoms[0].shape[0] if dim is None else dim
    return MatrixFamily(dim=dim, kind=FINITE_IID, atoms=atoms, probs=tuple(probs), seed=seed)


def schedule(atoms, dim=None, seed=0) -> MatrixFamily:
    """Periodic deterministic sequence; the atom list is one period."""
    atoms = tuple(np.asarray(a, dtype=float) for a in atoms)
    dim = atoms[0].shape[0] if dim is None else dim
    return MatrixFamily(dim=dim, kind=SCHEDULE, atoms=atoms, seed=seed)


def stream(seed: int, replica: int) -> np.random.Generator:
    """Independent counter-based stream for one replica."""
    key = np.array([np.uint64(seed & (2**64 - 1)), np.uint64(replica)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_indices(f: MatrixFamily, n: int, replica: int, seed: int | None = None) -> np.ndarray:
    """Atom indices for one replica; a pure function of (seed, replica, n)."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if f.kind == SCHEDULE:
        reps = -(-n // len(f.atoms))
        return np.tile(np.arange(len(f.atoms)), reps)[:n]
    gen = stream(f.seed if seed is None else seed, replica)
    return gen.choice(len(f.atoms), size=n, p=np.array(f.probs))


def sample_sequence(f: MatrixFamily, n: int, replica: int = 0, seed: int | None = None) -> np.ndarray:
    """The first n sample matrices of one replica, shape (n, d, d)."""
    idx = sample_indices(f, n, replica, seed)
    return np.stack(f.atoms)[idx]


def atom_inverses(f: MatrixFamily) -> tuple[np.ndarray, ...]:
    """Inverses of every atom; fails loudly on a singular atom."""
    out = []
    for i, a in enumerate(f.atoms):
        try:
            out.append(np.linalg.inv(a))
        except np.linalg.LinAlgError:
            raise SingularSample(f"atom {i} is singular") from None
    return tuple(out)


def expect_log_abs(values, probs) -> float:
    """Exact expectation of log|value| over finite support; -inf on a zero atom."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if np.any(values == 0.0):
        return -np.inf
    return float(np.dot(probs, np.log(np.abs(values))))


def conjugate_family(f: MatrixFamily, p) -> MatrixFamily:
    """Family of P^-1 A P over the same atom stream."""
    p = as_matrix(p, f.dim)
    p_inv = np.linalg.inv(p)
    return MatrixFamily(
        dim=f.dim,
        kind=f.kind,
        atoms=tuple(p_inv @ a @ p for a in f.atoms),
        probs=f.probs,
        seed=f.seed,
    )


@dataclass
class ComponentFamilies:
    """Per-label subfamilies of a family decomposed along a shape set.

    Component j of every atom keeps exactly the entries covered by label j,
    so summing the component atoms over j reconstructs the base atoms
    bit-exactly and all subfamilies share the base atom stream.
    """

    base: MatrixFamily
    shape_set: ShapeSet
    components: dict[int, MatrixFamily] = field(default_factory=dict)


def component_families(f: MatrixFamily, s: ShapeSet, zero_tol: float = 0.0) -> ComponentFamilies:
    if f.dim != s.dim:
        raise DimensionMismatch(f"family dim {f.dim} != shape set dim {s.dim}")
    per_label: dict[int, list[np.ndarray]] = {j: [] for j in range(s.k)}
    for atom in f.atoms:
        parts = decompose(atom, s, zero_tol).components
        for j in range(s.k):
            per_label[j].append(parts[j])
    comps = {
        j: MatrixFamily(dim=f.dim, kind=f.kind, atoms=tuple(per_label[j]), probs=f.probs, seed=f.seed)
        for j in range(s.k)
    }
    return ComponentFamilies(base=f, shape_set=s, components=comps)
