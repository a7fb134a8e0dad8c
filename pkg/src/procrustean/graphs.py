"""The core bipartite set-labeled transition graph and its language semantics.

Vertices alternate between action kind and observation kind; every edge
carries a nonempty label over the matching event space.  A graph denotes
the prefix-closed set of alternating event sequences that can be traced
from some initial vertex (its induced language).  Graphs are immutable;
every algorithm returns new graphs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

from . import labels as lb
from .errors import KindMismatchError, NotAkinError, ValidationError
from .labels import (
    ACTION,
    OBSERVATION,
    EventValue,
    Label,
    Space,
    opposite,
)


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    label: Label


@dataclass(frozen=True)
class PGraph:
    """A finite bipartite labeled digraph with a nonempty initial vertex set."""

    action_space: Space
    observation_space: Space
    vertices: tuple  # sorted (id, kind) pairs
    edges: tuple
    initial: frozenset

    def __init__(self, action_space, observation_space, vertices, edges, initial):
        if isinstance(vertices, Mapping):
            vertices = tuple(sorted(vertices.items()))
        else:
            vertices = tuple(sorted(tuple(v) for v in vertices))
        edges = tuple(
            e if isinstance(e, Edge) else Edge(*e) for e in edges
        )
        edges = tuple(
            sorted(edges, key=lambda e: (e.src, e.dst, lb._label_sort_key(e.label)))
        )
        object.__setattr__(self, "action_space", action_space)
        object.__setattr__(self, "observation_space", observation_space)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "initial", frozenset(initial))

    @cached_property
    def kind_of(self) -> dict:
        return dict(self.vertices)

    @cached_property
    def out_edges(self) -> dict:
        out = {v: [] for v, _ in self.vertices}
        for e in self.edges:
            out[e.src].append(e)
        return out

    @cached_property
    def initial_kind(self) -> Optional[str]:
        kinds = {self.kind_of[v] for v in self.initial if v in self.kind_of}
        return next(iter(kinds)) if len(kinds) == 1 else None

    def space_for(self, kind: str) -> Space:
        return self.action_space if kind == ACTION else self.observation_space

    def out_labels(self, v: str) -> list:
        return [e.label for e in self.out_edges.get(v, [])]

    def out_union(self, v: str) -> Label:
        kind = self.kind_of[v]
        return lb.union_all(self.out_labels(v), self.space_for(kind), kind)

    def is_sink(self, v: str) -> bool:
        return not self.out_edges.get(v)

    def step(self, states: frozenset, event: EventValue) -> frozenset:
        """All vertices reachable from ``states`` by one edge containing ``event``."""
        nxt = set()
        for v in states:
            for e in self.out_edges.get(v, []):
                if lb.contains(e.label, event):
                    nxt.add(e.dst)
        return frozenset(nxt)

    def reachable(self) -> frozenset:
        seen = set(self.initial)
        stack = list(self.initial)
        while stack:
            v = stack.pop()
            for e in self.out_edges.get(v, []):
                if e.dst not in seen:
                    seen.add(e.dst)
                    stack.append(e.dst)
        return frozenset(seen)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    problems: tuple

    def codes(self):
        return [p.code for p in self.problems]


def validate(g: PGraph) -> ValidationReport:
    """Check every structural invariant; returns a report, never raises."""
    problems = []

    def bad(code, msg):
        problems.append(Problem(code, msg))

    kinds = g.kind_of
    for v, kind in g.vertices:
        if not isinstance(v, str) or not v:
            bad("BadVertexId", f"vertex id {v!r} must be a nonempty string")
        if kind not in (ACTION, OBSERVATION):
            bad("BadVertexKind", f"vertex {v!r} has unknown kind {kind!r}")

    if not g.initial:
        bad("NoInitialState", "the initial vertex set is empty")
    for v in sorted(g.initial):
        if v not in kinds:
            bad("UnknownVertex", f"initial vertex {v!r} is not declared")
    init_kinds = {kinds[v] for v in g.initial if v in kinds}
    if len(init_kinds) > 1:
        bad("MixedInitialKinds", "initial vertices must all share one kind")

    if isinstance(g.action_space, lb.FiniteSpace) and isinstance(
        g.observation_space, lb.FiniteSpace
    ):
        shared = g.action_space.alphabet & g.observation_space.alphabet
        if shared:
            bad(
                "OverlappingSpaces",
                f"action and observation alphabets share {sorted(shared)}",
            )

    for i, e in enumerate(g.edges):
        where = f"edge {i} ({e.src!r} -> {e.dst!r})"
        if e.src not in kinds or e.dst not in kinds:
            bad("UnknownVertex", f"{where} references an undeclared vertex")
            continue
        src_kind = kinds[e.src]
        if kinds[e.dst] != opposite(src_kind):
            bad(
                "BipartitenessViolation",
                f"{where} must lead from an {src_kind} vertex to an "
                f"{opposite(src_kind)} vertex",
            )
        if e.label.kind != src_kind:
            bad(
                "LabelKindMismatch",
                f"{where} carries a {e.label.kind} label on an {src_kind} vertex",
            )
        elif not lb.label_fits_space(g.space_for(src_kind), e.label):
            bad("LabelOutsideSpace", f"{where} label does not fit the declared space")
        if lb.is_empty(e.label):
            bad("EmptyEdgeLabel", f"{where} carries an empty label")

    return ValidationReport(ok=not problems, problems=tuple(problems))


def require_valid(g: PGraph):
    report = validate(g)
    if not report.ok:
        raise ValidationError(report.problems)
    return g


# ---------------------------------------------------------------------------
# Language membership and bounded enumeration
# ---------------------------------------------------------------------------


def is_execution(g: PGraph, events: Sequence[EventValue]) -> bool:
    """Membership of an alternating event sequence in the induced language."""
    events = list(events)
    if not events:
        return True
    kind = g.initial_kind
    if kind is None:
        raise ValidationError([Problem("MixedInitialKinds", "invalid initial set")])
    first_space = g.space_for(kind)
    other_space = g.space_for(opposite(kind))
    if not lb.value_fits_space(first_space, events[0]) and lb.value_fits_space(
        other_space, events[0]
    ):
        raise KindMismatchError(
            f"sequence starts with an {opposite(kind)} event but the graph is "
            f"{kind}-first"
        )
    states = frozenset(g.initial)
    expected = kind
    for ev in events:
        if not lb.value_fits_space(g.space_for(expected), ev):
            return False
        states = g.step(states, ev)
        if not states:
            return False
        expected = opposite(expected)
    return True


class LabelSampler:
    """Finitely many representative events per refined label class.

    Built over the union of every edge label of one or more graphs, the
    samples are signature-complete: any two events that some collection of
    co-incident labels could distinguish fall in different refinement
    blocks, so sampling one event per block loses no structure.
    """

    def __init__(self, action_events: Sequence[EventValue], observation_events):
        self._events = {
            ACTION: tuple(action_events),
            OBSERVATION: tuple(observation_events),
        }

    @classmethod
    def for_graphs(cls, graphs: Iterable[PGraph]) -> "LabelSampler":
        per_kind = {ACTION: [], OBSERVATION: []}
        for g in graphs:
            for e in g.edges:
                per_kind[e.label.kind].append(e.label)
        reps = {}
        for kind, labs in per_kind.items():
            blocks = lb.refine_labels(labs) if labs else []
            reps[kind] = [lb.representative(b) for b in blocks]
        return cls(reps[ACTION], reps[OBSERVATION])

    def events(self, kind: str):
        return self._events[kind]


def executions_up_to(
    g: PGraph, depth: int, sampler: Optional[LabelSampler] = None
) -> set:
    """All executions of length at most ``depth`` over sampled events.

    The result is prefix-closed.  When comparing two graphs for bounded
    language equality, pass a sampler built over both graphs so each draws
    from the same event pool.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if sampler is None:
        sampler = LabelSampler.for_graphs([g])
    out = {()}
    frontier = {(): frozenset(g.initial)}
    kind = g.initial_kind
    for _ in range(depth):
        if not frontier or kind is None:
            break
        nxt = {}
        for seq, states in frontier.items():
            for ev in sampler.events(kind):
                succ = g.step(states, ev)
                if succ:
                    nxt[seq + (ev,)] = succ
        out.update(nxt.keys())
        frontier = nxt
        kind = opposite(kind)
    return out


# ---------------------------------------------------------------------------
# Union
# ---------------------------------------------------------------------------


def check_akin(a: PGraph, b: PGraph):
    if a.initial_kind is None or b.initial_kind is None:
        raise NotAkinError("graphs with mixed initial kinds are not akin to anything")
    if a.initial_kind != b.initial_kind:
        raise NotAkinError(
            f"one graph is {a.initial_kind}-first, the other {b.initial_kind}-first"
        )


def _merge_spaces(sa: Space, sb: Space) -> Space:
    if sa == sb:
        return sa
    if isinstance(sa, lb.FiniteSpace) and isinstance(sb, lb.FiniteSpace):
        return lb.FiniteSpace(sa.alphabet | sb.alphabet)
    raise NotAkinError("cannot merge differing non-finite event spaces")


def union_with_renames(a: PGraph, b: PGraph):
    """Vertex-disjoint union; returns the graph plus the per-side rename maps."""
    check_akin(a, b)
    ids_a = {v for v, _ in a.vertices}
    ids_b = {v for v, _ in b.vertices}
    if ids_a & ids_b:
        ren_a = {v: f"L.{v}" for v in ids_a}
        ren_b = {v: f"R.{v}" for v in ids_b}
    else:
        ren_a = {v: v for v in ids_a}
        ren_b = {v: v for v in ids_b}
    vertices = [(ren_a[v], k) for v, k in a.vertices] + [
        (ren_b[v], k) for v, k in b.vertices
    ]
    edges = [Edge(ren_a[e.src], ren_a[e.dst], e.label) for e in a.edges] + [
        Edge(ren_b[e.src], ren_b[e.dst], e.label) for e in b.edges
    ]
    initial = {ren_a[v] for v in a.initial} | {ren_b[v] for v in b.initial}
    g = PGraph(
        _merge_spaces(a.action_space, b.action_space),
        _merge_spaces(a.observation_space, b.observation_space),
        vertices,
        edges,
        initial,
    )
    return g, ren_a, ren_b


def pgraph_union(a: PGraph, b: PGraph) -> PGraph:
    """Union of two akin graphs; the result's language is the union of both."""
    g, _, _ = union_with_renames(a, b)
    return g


# ---------------------------------------------------------------------------
# Joint product of two state-determined graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    """Outcome of a binary relation check, with a witness when it fails."""

    holds: bool
    witness: Optional[tuple] = None
    detail: str = ""

    def to_json(self):
        return {
            "holds": self.holds,
            "witness": None if self.witness is None else list(self.witness),
            "detail": self.detail,
        }


@dataclass
class ProductGraph:
    """Reachable joint behavior of two akin state-determined graphs.

    Nodes are pairs of same-kind vertices; each product edge follows one
    representative event per refined label block that both sides accept.
    ``a_only`` and ``b_only`` record blocks only one side accepts, which is
    exactly the information the safety check needs.
    """

    a: PGraph
    b: PGraph
    start: tuple
    nodes: list = field(default_factory=list)  # in BFS discovery order
    succ: dict = field(default_factory=dict)  # node -> [(event, node)]
    parent: dict = field(default_factory=dict)  # node -> (node, event)
    a_only: dict = field(default_factory=dict)  # node -> [event]
    b_only: dict = field(default_factory=dict)

    def path_to(self, node) -> tuple:
        events = []
        while node != self.start:
            node, ev = self.parent[node]
            events.append(ev)
        return tuple(reversed(events))


def _sd_successor(g: PGraph, v: str, event: EventValue) -> Optional[str]:
    """Unique successor in a state-determined graph, or None."""
    for e in g.out_edges.get(v, []):
        if lb.contains(e.label, event):
            return e.dst
    return None


def joint_product(a: PGraph, b: PGraph) -> ProductGraph:
    """Forward search over vertex pairs reachable by joint executions.

    Inputs that are not already state-determined are converted first; the
    converted graphs are carried on the result.
    """
    from .presentations import is_state_determined, to_state_determined

    check_akin(a, b)
    if not is_state_determined(a):
        a, _ = to_state_determined(a)
    if not is_state_determined(b):
        b, _ = to_state_determined(b)
    start = (next(iter(a.initial)), next(iter(b.initial)))
    prod = ProductGraph(a=a, b=b, start=start)
    seen = {start}
    queue = deque([start])
    prod.nodes.append(start)
    while queue:
        node = queue.popleft()
        va, vb = node
        la = a.out_labels(va)
        lab_b = b.out_labels(vb)
        blocks = lb.refine_labels(la + lab_b) if (la or lab_b) else []
        succ, only_a, only_b = [], [], []
        for blk in blocks:
            ev = lb.representative(blk)
            na = _sd_successor(a, va, ev)
            nb = _sd_successor(b, vb, ev)
            if na is not None and nb is not None:
                nxt = (na, nb)
                succ.append((ev, nxt))
                if nxt not in seen:
                    seen.add(nxt)
                    prod.parent[nxt] = (node, ev)
                    prod.nodes.append(nxt)
                    queue.append(nxt)
            elif na is not None:
                only_a.append(ev)
            elif nb is not None:
                only_b.append(ev)
        prod.succ[node] = succ
        prod.a_only[node] = only_a
        prod.b_only[node] = only_b
    return prod


def find_product_cycle(prod: ProductGraph):
    """A reachable cycle as (handle_node, cycle_events), or None."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in prod.nodes}
    stack = [(prod.start, iter(prod.succ[prod.start]))]
    color[prod.start] = GREY
    trail = [(prod.start, None)]
    while stack:
        node, it = stack[-1]
        advanced = False
        for ev, nxt in it:
            if color[nxt] == WHITE:
                color[nxt] = GREY
                stack.append((nxt, iter(prod.succ[nxt])))
                trail.append((nxt, ev))
                advanced = True
                break
            if color[nxt] == GREY:
                # Back edge: reconstruct the cycle from the grey trail.
                cycle_events = [ev]
                for tn, tev in reversed(trail):
                    if tn == nxt:
                        break
                    cycle_events.append(tev)
                cycle_events.reverse()
                return nxt, tuple(cycle_events)
        if not advanced:
            color[node] = BLACK
            stack.pop()
            trail.pop()
    return None


# ---------------------------------------------------------------------------
# Safety and finiteness
# ---------------------------------------------------------------------------


def is_safe_on(a: PGraph, b: PGraph) -> Verdict:
    """At every reachable joint pair, b covers a's actions and a covers b's
    observations."""
    check_akin(a, b)
    prod = joint_product(a, b)
    ga, gb = prod.a, prod.b
    for node in prod.nodes:
        va, vb = node
        kind = ga.kind_of[va]
        if kind == ACTION:
            gap = lb.difference(ga.out_union(va), gb.out_union(vb))
            side = "action missing from the right graph"
        else:
            gap = lb.difference(gb.out_union(vb), ga.out_union(va))
            side = "observation missing from the left graph"
        if not lb.is_empty(gap):
            ev = lb.representative(gap)
            return Verdict(
                holds=False,
                witness=prod.path_to(node) + (ev,),
                detail=f"at joint pair {node}: {side} ({ev!r})",
            )
    return Verdict(holds=True, detail="all reachable joint pairs are covered")


def is_finite_on(a: PGraph, b: PGraph) -> Verdict:
    """Joint executions are length-bounded iff the joint product is acyclic."""
    check_akin(a, b)
    prod = joint_product(a, b)
    found = find_product_cycle(prod)
    if found is None:
        return Verdict(holds=True, detail="joint product is acyclic")
    node, cycle = found
    return Verdict(
        holds=False,
        witness=prod.path_to(node) + cycle,
        detail=f"joint pair {node} lies on a pumpable cycle of length {len(cycle)}",
    )
