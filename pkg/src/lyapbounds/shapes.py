"""Sparsity-type sets, their transition graphs, and structural analysis.

A *label set* is a family of nonzero zero-one masks with pairwise disjoint
supports.  Walking labels under the boolean product generates a finite
transition graph whose structure (self-loops, absorption into the zero
mask, branching) controls how many nonzero monomials a decomposed matrix
product can have.  This module builds that graph, extracts the structural
quantities the growth bounds consume, and provides a desk-scale exhaustive
monomial oracle for cross-checking the counting arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import inf, log

import numpy as np

from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    EmptyLabel,
    OverlappingLabels,
    UncoveredEntry,
    VertexBudgetExceeded,
)
from .linalg import ShapeMask, as_matrix, bool_product, mask_and, mask_or, shape_of, spectral_radius

DEFAULT_VERTEX_BUDGET = 4096
DEFAULT_ORACLE_BUDGET = 10**6
# Stabilization probe: mask powers over a finite set are eventually periodic,
# so requiring dim consecutive equal powers within 2*dim+16 steps is a sound
# period-1 test for dim x dim masks.
STABILIZATION_EXTRA = 16


@dataclass(frozen=True)
class ShapeSet:
    """Validated collection of disjoint nonzero labels, order-preserving."""

    dim: int
    labels: tuple[ShapeMask, ...]

    @property
    def k(self) -> int:
        return len(self.labels)

    def to_json_dict(self) -> dict:
        return {"dim": self.dim, "labels": [list(l.bits) for l in self.labels]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ShapeSet":
        dim = int(obj["dim"])
        labels = []
        for raw in obj["labels"]:
            arr = np.asarray(raw)
            mask = ShapeMask.from_array(arr)
            if mask.dim != dim:
                raise DimensionMismatch(f"label dim {mask.dim} != declared dim {dim}")
            labels.append(mask)
        return validate_shape_set(labels)


def validate_shape_set(labels) -> ShapeSet:
    """Check nonemptiness, equal dims, nonzero labels, and pairwise disjointness."""
    labels = [l if isinstance(l, ShapeMask) else ShapeMask.from_array(l) for l in labels]
    if not labels:
        raise DimensionMismatch("a shape set needs at least one label")
    dim = labels[0].dim
    for idx, l in enumerate(labels):
        if l.dim != dim:
            raise DimensionMismatch(f"label {idx + 1} has dim {l.dim}, expected {dim}")
        if l.is_zero():
            raise EmptyLabel(idx)
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            if not mask_and(labels[i], labels[j]).is_zero():
                raise OverlappingLabels(i, j)
    if len(labels) > dim * dim:
        raise DimensionMismatch("more labels than matrix entries")  # unreachable if disjoint
    return ShapeSet(dim, tuple(labels))


@dataclass(frozen=True)
class ShapeGraph:
    """Transition-closed vertex set over a shape set.

    ``transitions[v][s]`` is the vertex index reached from vertex ``v`` by
    applying label ``s`` on the left (new factors multiply on the left, so
    the cumulative mask of a monomial evolves by left boolean products).
    """

    shape_set: ShapeSet
    vertices: tuple[ShapeMask, ...]
    transitions: tuple[tuple[int, ...], ...]  # [vertex][label] -> vertex index
    zero_index: int | None

    @property
    def contains_zero(self) -> bool:
        return self.zero_index is not None

    def nonzero_indices(self) -> list[int]:
        return [i for i in range(len(self.vertices)) if i != self.zero_index]

    def vertex_index(self, mask: ShapeMask) -> int:
        return self.vertices.index(mask)


def build_shape_graph(s: ShapeSet, max_vertices: int = DEFAULT_VERTEX_BUDGET) -> ShapeGraph:
    """Breadth-first closure of the label shapes under left boolean products."""
    if max_vertices < s.k:
        raise VertexBudgetExceeded(f"vertex budget {max_vertices} below label count {s.k}")
    index: dict[ShapeMask, int] = {}
    vertices: list[ShapeMask] = []

    def intern(mask: ShapeMask) -> int:
        if mask not in index:
            if len(vertices) >= max_vertices:
                raise VertexBudgetExceeded(
                    f"vertex budget {max_vertices} hit before the graph closed"
                )
            index[mask] = len(vertices)
            vertices.append(mask)
        return index[mask]

    queue = []
    for label in s.labels:
        seed = ShapeMask.from_array(label.to_array())
        if seed not in index:
            queue.append(intern(seed))
    transitions: dict[int, list[int]] = {}
    head = 0
    while head < len(queue):
        v = queue[head]
        head += 1
        row = []
        for label in s.labels:
            target = bool_product(label, vertices[v])
            fresh = target not in index
            t = intern(target)
            row.append(t)
            if fresh:
                queue.append(t)
        transitions[v] = row
    zero = ShapeMask.zero(s.dim)
    zero_index = index.get(zero)
    table = tuple(tuple(transitions[v]) for v in range(len(vertices)))
    return ShapeGraph(s, tuple(vertices), table, zero_index)


@dataclass(frozen=True)
class StructuralReport:
    """Structural facts the growth bounds hypothesize on.

    Vertex values are indices into ``graph.vertices``; label values are
    0-based indices into the shape set (serialized 1-based).
    """

    acyclic_except_self_loops: bool
    at_most_one_self_loop_per_vertex: bool
    loop_vertices: tuple[int, ...]  # nonzero vertices with a self-loop
    loop_labels: tuple[int, ...]  # labels realizing those self-loops
    k_star: int | None  # present iff the zero mask is reachable
    w_vertices: tuple[int, ...]  # loop vertices no other loop vertex reaches
    w_labels: tuple[int, ...]  # their self-loop labels
    stabilization: dict[int, int | None] = field(default_factory=dict)  # w -> r(w)
    disjointness_ok: dict[int, bool] = field(default_factory=dict)  # w -> support check
    num_labels: int = 0
    contains_zero: bool = False

    def usable_w(self) -> list[int]:
        """W vertices whose stabilization and disjointness checks both pass."""
        return [
            w
            for w in self.w_vertices
            if self.stabilization.get(w) is not None and self.disjointness_ok.get(w, False)
        ]


def _self_loop_labels(graph: ShapeGraph, v: int) -> list[int]:
    return [s for s, t in enumerate(graph.transitions[v]) if t == v]


def _has_cycle_outside_self_loops(graph: ShapeGraph) -> bool:
    # Iterative 3-color DFS over nonzero vertices, self-loop edges removed.
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {v: WHITE for v in graph.nonzero_indices()}
    for root in graph.nonzero_indices():
        if color[root] != WHITE:
            continue
        stack = [(root, iter(graph.transitions[root]))]
        color[root] = GRAY
        while stack:
            v, it = stack[-1]
            advanced = False
            for t in it:
                if t == v or t == graph.zero_index:
                    continue
                if color[t] == GRAY:
                    return True
                if color[t] == WHITE:
                    color[t] = GRAY
                    stack.append((t, iter(graph.transitions[t])))
                    advanced = True
                    break
            if not advanced:
                color[v] = BLACK
                stack.pop()
    return False


def _reachable_from(graph: ShapeGraph, start: int) -> set[int]:
    """Vertices reachable from ``start`` in one or more steps (zero excluded)."""
    seen: set[int] = set()
    frontier = [t for t in graph.transitions[start] if t != graph.zero_index]
    while frontier:
        v = frontier.pop()
        if v in seen:
            continue
        seen.add(v)
        frontier.extend(t for t in graph.transitions[v] if t != graph.zero_index and t not in seen)
    return seen


def _branching_constant(graph: ShapeGraph) -> int:
    """Max number of labels keeping a vertex nonzero, over entered vertices.

    The max runs over nonzero vertices that can be *entered* from a different
    nonzero vertex.  Pure starting vertices (typically the identity mask seed)
    are excluded: a walk can occupy such a vertex only by repeating its single
    self-loop, so its out-branching inflates monomial counts by a constant
    factor per walk, not a per-step factor.  When no vertex has an incoming
    move the max falls back to all nonzero vertices.
    """
    survivors = {
        v: sum(1 for t in graph.transitions[v] if t != graph.zero_index)
        for v in graph.nonzero_indices()
    }
    entered = {
        t
        for v in graph.nonzero_indices()
        for t in graph.transitions[v]
        if t != v and t != graph.zero_index
    }
    pool = entered if entered else set(graph.nonzero_indices())
    return max(1, max((survivors[v] for v in pool), default=0))


def analyze_structure(graph: ShapeGraph) -> StructuralReport:
    """Detect cycles, self-loops, branching constant, and sheltered loop vertices."""
    nonzero = graph.nonzero_indices()
    loops = {v: _self_loop_labels(graph, v) for v in nonzero}
    loop_vertices = tuple(v for v in nonzero if loops[v])
    loop_labels = tuple(sorted({s for v in loop_vertices for s in loops[v]}))
    at_most_one = all(len(loops[v]) <= 1 for v in nonzero)
    acyclic = not _has_cycle_outside_self_loops(graph)

    k_star = _branching_constant(graph) if graph.contains_zero else None

    # W: loop vertices that no other loop vertex can reach, so every walk
    # ending there avoids foreign loop vertices.
    reach = {h: _reachable_from(graph, h) for h in loop_vertices}
    w_vertices = tuple(
        w for w in loop_vertices if all(w not in reach[h] for h in loop_vertices if h != w)
    )
    w_labels = tuple(sorted({loops[w][0] for w in w_vertices if loops[w]}))

    stabilization: dict[int, int | None] = {}
    disjointness: dict[int, bool] = {}
    d = graph.shape_set.dim
    probe_max = 2 * d + STABILIZATION_EXTRA
    for w in w_vertices:
        label = graph.shape_set.labels[loops[w][0]]
        target = graph.vertices[w]
        powers = []
        p = label
        for _ in range(probe_max):
            powers.append(p)
            p = bool_product(label, p)
        stabilization[w] = next(
            (
                n + 1
                for n in range(probe_max - d)
                if all(powers[m] == target for m in range(n, n + d + 1))
            ),
            None,
        )
        disjointness[w] = all(
            mask_and(graph.vertices[v], target).is_zero()
            for v in range(len(graph.vertices))
            if v != w and v != graph.zero_index
        )

    return StructuralReport(
        acyclic_except_self_loops=acyclic,
        at_most_one_self_loop_per_vertex=at_most_one,
        loop_vertices=loop_vertices,
        loop_labels=loop_labels,
        k_star=k_star,
        w_vertices=w_vertices,
        w_labels=w_labels,
        stabilization=stabilization,
        disjointness_ok=disjointness,
        num_labels=graph.shape_set.k,
        contains_zero=graph.contains_zero,
    )


@dataclass(frozen=True)
class Decomposition:
    """Split of a matrix into per-label components summing back exactly."""

    components: tuple[np.ndarray, ...]

    def total(self) -> np.ndarray:
        return sum(self.components)


def decompose(m, s: ShapeSet, zero_tol: float = 0.0) -> Decomposition:
    """Route each entry of ``m`` to the unique label covering it.

    With the default ``zero_tol = 0`` the components sum back to ``m``
    bit-exactly.  A positive tolerance treats uncovered entries of
    magnitude at most ``zero_tol`` as rounding noise and drops them
    (intended for data read from rounded text); larger uncovered entries
    still raise.
    """
    a = as_matrix(m, s.dim)
    covered = ShapeMask.zero(s.dim)
    for label in s.labels:
        covered = mask_or(covered, label)
    support = shape_of(a, zero_tol)
    stray = mask_and(support, ShapeMask.from_array(1 - covered.to_array()))
    if not stray.is_zero():
        i, j = divmod(next(p for p, b in enumerate(stray.bits) if b), s.dim)
        raise UncoveredEntry(i, j)
    comps = tuple(a * label.to_array() for label in s.labels)
    return Decomposition(comps)


def enumerate_nonzero_monomials(
    graph: ShapeGraph, n: int, budget: int = DEFAULT_ORACLE_BUDGET
) -> list[tuple[int, ...]]:
    """All label sequences (i_1..i_n) whose cumulative mask stays nonzero.

    Exhaustive by a priori count, so guarded by ``k**n <= budget``; dead
    branches are pruned the moment a walk hits the zero mask.
    """
    k = graph.shape_set.k
    if n < 1:
        raise ValueError("n must be >= 1")
    if k**n > budget:
        raise BudgetExceeded(f"k^n = {k}^{n} exceeds oracle budget {budget}")
    # Seed vertex of label s is the shape of the label itself.
    label_vertex = [graph.vertex_index(shape_of(l.to_array(), 0.0)) for l in graph.shape_set.labels]
    out: list[tuple[int, ...]] = []
    stack: list[tuple[tuple[int, ...], int]] = [
        ((s,), label_vertex[s]) for s in reversed(range(k))
    ]
    while stack:
        seq, v = stack.pop()
        if v == graph.zero_index:
            continue
        if len(seq) == n:
            out.append(seq)
            continue
        for s in reversed(range(k)):
            stack.append((seq + (s,), graph.transitions[v][s]))
    return out


@dataclass(frozen=True)
class EntropyRefinement:
    """Per-step branching rates: label count, branching constant, walk growth."""

    log_k: float
    log_k_star: float | None
    log_rho_m: float
    log_max_outdegree: float


def entropy_refinement(graph: ShapeGraph) -> EntropyRefinement:
    """Walk-count growth rates on the nonzero part of the graph.

    M counts, per ordered vertex pair, how many labels realize the move; its
    spectral radius bounds the exponential growth of surviving walk counts
    and is never larger than the cruder per-step branching constants.
    """
    nonzero = graph.nonzero_indices()
    pos = {v: i for i, v in enumerate(nonzero)}
    m = np.zeros((len(nonzero), len(nonzero)))
    for v in nonzero:
        for t in graph.transitions[v]:
            if t != graph.zero_index:
                m[pos[v], pos[t]] += 1.0
    rho = spectral_radius(m) if len(nonzero) else 0.0
    out_degree = m.sum(axis=1).max() if len(nonzero) else 0.0
    report = analyze_structure(graph)
    return EntropyRefinement(
        log_k=log(graph.shape_set.k),
        log_k_star=None if report.k_star is None else log(report.k_star),
        log_rho_m=log(rho) if rho > 0 else -inf,
        log_max_outdegree=log(out_degree) if out_degree > 0 else -inf,
    )


def graph_to_json_dict(graph: ShapeGraph, report: StructuralReport | None = None) -> dict:
    """JSON form: vertices as row-major bit-strings, labels 1-based."""
    order = sorted(range(len(graph.vertices)), key=lambda v: graph.vertices[v].bitstring())
    edges = [
        {
            "from": graph.vertices[v].bitstring(),
            "label": s + 1,
            "to": graph.vertices[t].bitstring(),
        }
        for v in range(len(graph.vertices))
        for s, t in enumerate(graph.transitions[v])
    ]
    doc = {
        "dim": graph.shape_set.dim,
        "num_labels": graph.shape_set.k,
        "contains_zero": graph.contains_zero,
        "vertices": [graph.vertices[v].bitstring() for v in order],
        "edges": sorted(edges, key=lambda e: (e["from"], e["label"])),
    }
    if report is not None:
        doc["structure"] = structural_report_to_json_dict(graph, report)
    return doc


def structural_report_to_json_dict(graph: ShapeGraph, report: StructuralReport) -> dict:
    bit = lambda v: graph.vertices[v].bitstring()
    return {
        "acyclic_except_self_loops": report.acyclic_except_self_loops,
        "at_most_one_self_loop_per_vertex": report.at_most_one_self_loop_per_vertex,
        "loop_vertices": sorted(bit(v) for v in report.loop_vertices),
        "loop_labels": [s + 1 for s in report.loop_labels],
        "k_star": report.k_star,
        "w_vertices": sorted(bit(v) for v in report.w_vertices),
        "w_labels": [s + 1 for s in report.w_labels],
        "stabilization": {bit(v): r for v, r in sorted(report.stabilization.items())},
        "disjointness_ok": {bit(v): ok for v, ok in sorted(report.disjointness_ok.items())},
        "num_labels": report.num_labels,
        "contains_zero": report.contains_zero,
    }
