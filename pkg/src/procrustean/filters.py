"""Filter equivalence under observation maps, destructiveness, and sensor
minimization.

The central check asks whether one filter, fed observations mutated by a
map, reproduces another filter's outputs.  A map that lets the mapped
filter reproduce the original is non-destructive.  Minimizing the image
size of a non-destructive map is NP-hard (graph coloring embeds into it),
so the exact minimizer here is a desk-scale brute force paired with the
coloring reduction as a generator and an independent chromatic-number
oracle.
"""

from __future__ import annotations

import itertools
import os
from collections import deque
from dataclasses import dataclass
from typing import Optional

from . import labels as lb
from . import maps as mp
from .errors import (
    NotAkinError,
    NotDeterministicError,
    TooLargeError,
)
from .graphs import ACTION, OBSERVATION, Edge, PGraph, check_akin
from .presentations import (
    is_deterministic_filter,
    is_single_outputting,
    to_state_determined,
)

DEFAULT_BRUTEFORCE_CAP = 10


def bruteforce_cap() -> int:
    raw = os.environ.get("PGRAPH_MAX_BRUTEFORCE", "")
    try:
        return int(raw) if raw else DEFAULT_BRUTEFORCE_CAP
    except ValueError:
        return DEFAULT_BRUTEFORCE_CAP


@dataclass(frozen=True)
class EquivalenceVerdict:
    """Result of the output-agreement check between two filters."""

    holds: bool
    witness: Optional[tuple] = None  # observation-terminal joint sequence
    left_outputs: Optional[tuple] = None
    right_outputs: Optional[tuple] = None
    detail: str = ""

    def to_json(self):
        return {
            "holds": self.holds,
            "witness": None if self.witness is None else [repr(e) for e in self.witness],
            "left_outputs": self.left_outputs,
            "right_outputs": self.right_outputs,
            "detail": self.detail,
        }


_DEAD = object()  # right filter has no surviving branch


def _outputs_repr(g: PGraph, v) -> tuple:
    if v is _DEAD:
        return ()
    evs = set()
    for e in g.out_edges.get(v, []):
        listed = lb.enumerate_events(e.label)
        if listed is None:
            return (lb.format_label(g.out_union(v)),)
        evs.update(str(x) for x in listed)
    return tuple(sorted(evs))


def equivalence_modulo_map(
    f1: PGraph, f2: PGraph, h: mp.LabelMap
) -> EquivalenceVerdict:
    """Does f2, consuming observations through h, match f1's outputs?

    Forward search over pairs of state-determined vertices.  At observation
    pairs, f1's refined out-labels are refined together with the preimages
    of f2's refined out-labels, and the search branches on a representative
    of each block: f1 steps on the representative itself, f2 on every one
    of its own blocks whose preimage contains it.  At action pairs the two
    output label sets must be exactly equal (checked with difference and
    emptiness, not sampling).
    """
    check_akin(f1, f2)
    sd1, _ = to_state_determined(f1)
    sd2, _ = to_state_determined(f2)
    start = (next(iter(sd1.initial)), next(iter(sd2.initial)))
    parent: dict = {start: None}
    queue = deque([start])

    def path_to(node) -> tuple:
        events = []
        while parent[node] is not None:
            node, ev = parent[node]
            events.append(ev)
        return tuple(reversed(events))

    while queue:
        node = queue.popleft()
        v1, v2 = node
        kind = sd1.kind_of[v1]
        if kind == ACTION:
            out1 = sd1.out_union(v1)
            out2 = (
                lb.empty_label_for(sd2.action_space, ACTION)
                if v2 is _DEAD
                else sd2.out_union(v2)
            )
            if not (
                lb.is_empty(lb.difference(out1, out2))
                and lb.is_empty(lb.difference(out2, out1))
            ):
                return EquivalenceVerdict(
                    holds=False,
                    witness=path_to(node),
                    left_outputs=_outputs_repr(sd1, v1),
                    right_outputs=_outputs_repr(sd2, v2),
                    detail="output sets differ after the witness sequence",
                )
            if v2 is _DEAD:
                continue
            blocks = lb.refine_labels(sd1.out_labels(v1) + sd2.out_labels(v2))
            for blk in blocks:
                ev = lb.representative(blk)
                n1 = _step_one(sd1, v1, ev)
                n2 = _step_one(sd2, v2, ev)
                if n1 is None:
                    continue
                nxt = (n1, n2 if n2 is not None else _DEAD)
                if nxt not in parent:
                    parent[nxt] = (node, ev)
                    queue.append(nxt)
        else:
            y1 = lb.refine_labels(sd1.out_labels(v1))
            if v2 is _DEAD:
                succs2 = []
            else:
                succs2 = [
                    (blk2, _step_one(sd2, v2, lb.representative(blk2)))
                    for blk2 in lb.refine_labels(sd2.out_labels(v2))
                ]
            pre2 = [
                (mp.preimage(h, OBSERVATION, blk2), t2) for blk2, t2 in succs2
            ]
            blocks = lb.refine_labels(y1 + [p for p, _ in pre2 if not lb.is_empty(p)])
            for blk in blocks:
                ev = lb.representative(blk)
                n1 = _step_one(sd1, v1, ev)
                if n1 is None:
                    continue  # not an observation f1 can make here
                targets2 = [t2 for p, t2 in pre2 if lb.contains(p, ev)]
                if not targets2:
                    targets2 = [_DEAD]
                for t2 in targets2:
                    nxt = (n1, t2)
                    if nxt not in parent:
                        parent[nxt] = (node, ev)
                        queue.append(nxt)
    return EquivalenceVerdict(holds=True, detail="all joint outputs agree")


def _step_one(g: PGraph, v, event):
    for e in g.out_edges.get(v, []):
        if lb.contains(e.label, event):
            return e.dst
    return None


def is_nondestructive_general(f: PGraph, h: mp.LabelMap) -> EquivalenceVerdict:
    """Whether f still reproduces its own outputs once h degrades it."""
    return equivalence_modulo_map(f, mp.apply_to_pgraph(h, f), h)


def destructiveness_test_deterministic(f: PGraph, h: mp.LabelMap) -> bool:
    """Fast non-destructiveness test for deterministic filters.

    Returns True iff h is non-destructive: the mapped filter's
    state-determined form must still be single-outputting.
    """
    verdict = is_deterministic_filter(f)
    if not verdict.holds:
        raise NotDeterministicError(
            f"the fast test needs a deterministic filter: {verdict.detail}"
        )
    mapped = mp.apply_to_pgraph(h, f)
    sd, _ = to_state_determined(mapped)
    return is_single_outputting(sd)


def is_nondestructive(f: PGraph, h: mp.LabelMap) -> bool:
    """Route to the fast test when the filter is deterministic."""
    if is_deterministic_filter(f).holds:
        return destructiveness_test_deterministic(f, h)
    return is_nondestructive_general(f, h).holds


# ---------------------------------------------------------------------------
# Sensor minimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinimizationResult:
    achievable: bool
    image_size: Optional[int] = None
    witness: Optional[mp.LabelMap] = None

    def to_json(self):
        from .serialize import map_to_json

        return {
            "achievable": self.achievable,
            "image_size": self.image_size,
            "witness": None if self.witness is None else map_to_json(self.witness),
        }


def _partitions_into_at_most(items, n):
    """Set partitions of ``items`` into at most n blocks, in a fixed order.

    Enumerated by restricted growth strings, so each partition appears once
    regardless of block naming.
    """
    items = list(items)
    if not items:
        yield []
        return

    def rec(i, blocks):
        if i == len(items):
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(items[i])
            yield from rec(i + 1, blocks)
            b.pop()
        if len(blocks) < n:
            blocks.append([items[i]])
            yield from rec(i + 1, blocks)
            blocks.pop()

    yield from rec(0, [])


def minimize_sensor_image(f: PGraph, n: int) -> MinimizationResult:
    """Decide whether some non-destructive observation map has image size <= n.

    Only maps to singletons need be tried: replacing a multi-element image
    by any one of its members never destroys more.  Candidates are set
    partitions of the observation alphabet, quotiented by renaming of the
    image symbols.
    """
    if n < 1:
        raise ValueError("image size bound must be at least 1")
    if not isinstance(f.observation_space, lb.FiniteSpace):
        raise TooLargeError("sensor minimization needs a finite observation space")
    alphabet = sorted(f.observation_space.alphabet)
    cap = bruteforce_cap()
    if len(alphabet) > cap:
        raise TooLargeError(
            f"observation space has {len(alphabet)} symbols; cap is {cap} "
            "(set PGRAPH_MAX_BRUTEFORCE to raise it)"
        )
    deterministic = is_deterministic_filter(f).holds
    for blocks in _partitions_into_at_most(alphabet, n):
        table = {}
        for idx, block in enumerate(blocks):
            for y in block:
                table[y] = [f"k{idx}"]
        h = mp.LabelMap(observation_map=mp.FiniteEventMap(table))
        ok = (
            destructiveness_test_deterministic(f, h)
            if deterministic
            else is_nondestructive_general(f, h).holds
        )
        if ok:
            return MinimizationResult(True, image_size=len(blocks), witness=h)
    return MinimizationResult(False)


def minimum_nondestructive_image_size(f: PGraph) -> int:
    """Smallest n for which minimize_sensor_image succeeds."""
    m = len(f.observation_space.alphabet)
    for n in range(1, m + 1):
        if minimize_sensor_image(f, n).achievable:
            return n
    raise RuntimeError("identity partition should always be non-destructive")


# ---------------------------------------------------------------------------
# Graph coloring: reduction generator and exact oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ColoringInstance:
    """A simple undirected graph with a fixed edge ordering."""

    vertices: tuple
    edges: tuple  # ordered pairs (a, b), a != b, as given

    def __init__(self, vertices, edges):
        vertices = tuple(vertices)
        seen = set()
        normd = []
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop at {a!r}")
            if a not in vertices or b not in vertices:
                raise ValueError(f"edge ({a!r}, {b!r}) uses unknown vertices")
            key = frozenset((a, b))
            if key in seen:
                raise ValueError(f"duplicate edge ({a!r}, {b!r})")
            seen.add(key)
            normd.append((a, b))
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", tuple(normd))


def reduce_from_3coloring(g: ColoringInstance) -> PGraph:
    """Build the filter whose minimal non-destructive image size is chi(g).

    One six-vertex gadget per graph edge, chained in the instance's fixed
    edge order: emit a marker, observe one endpoint, emit which endpoint it
    was, then accept either endpoint to move to the next gadget.
    """
    if not g.edges:
        raise ValueError("the reduction needs at least one edge")
    action_space = lb.FiniteSpace(["emit0", "emit1", "emit2"])
    obs_space = lb.FiniteSpace(g.vertices)
    vertices = {}
    edges = []
    for i, (v, w) in enumerate(g.edges):
        for name, kind in (
            (f"ai{i}", ACTION),
            (f"as{i}", ACTION),
            (f"at{i}", ACTION),
            (f"oi{i}", OBSERVATION),
            (f"os{i}", OBSERVATION),
            (f"ot{i}", OBSERVATION),
        ):
            vertices[name] = kind
        edges.append(Edge(f"ai{i}", f"oi{i}", lb.finite_label(ACTION, "emit0")))
        edges.append(Edge(f"as{i}", f"os{i}", lb.finite_label(ACTION, "emit1")))
        edges.append(Edge(f"at{i}", f"ot{i}", lb.finite_label(ACTION, "emit2")))
        edges.append(Edge(f"oi{i}", f"as{i}", lb.finite_label(OBSERVATION, v)))
        edges.append(Edge(f"oi{i}", f"at{i}", lb.finite_label(OBSERVATION, w)))
        if i + 1 < len(g.edges):
            both = lb.finite_label(OBSERVATION, v, w)
            edges.append(Edge(f"os{i}", f"ai{i+1}", both))
            edges.append(Edge(f"ot{i}", f"ai{i+1}", both))
    return PGraph(action_space, obs_space, vertices, edges, {"ai0"})


def _is_proper(g: ColoringInstance, coloring: dict) -> bool:
    return all(coloring[a] != coloring[b] for a, b in g.edges)


def chromatic_number(g: ColoringInstance) -> int:
    """Exact chromatic number by backtracking over k = 1..|V|."""
    cap = bruteforce_cap()
    if len(g.vertices) > cap:
        raise TooLargeError(
            f"instance has {len(g.vertices)} vertices; cap is {cap}"
        )
    if not g.vertices:
        return 0
    adj = {v: set() for v in g.vertices}
    for a, b in g.edges:
        adj[a].add(b)
        adj[b].add(a)
    order = sorted(g.vertices, key=lambda v: -len(adj[v]))

    def colorable(k: int) -> bool:
        assign: dict = {}

        def place(i: int) -> bool:
            if i == len(order):
                return True
            v = order[i]
            used = {assign[u] for u in adj[v] if u in assign}
            # Symmetry break: never open more than one fresh color.
            fresh_allowed = min(k, (max(assign.values()) + 2) if assign else 1)
            for c in range(fresh_allowed):
                if c in used:
                    continue
                assign[v] = c
                if place(i + 1):
                    return True
                del assign[v]
            return False

        return place(0)

    for k in range(1, len(g.vertices) + 1):
        if colorable(k):
            return k
    raise AssertionError("a graph is always |V|-colorable")
