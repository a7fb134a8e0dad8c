"""Language-preserving normal forms.

``to_state_determined`` is a powerset construction over refined label
blocks: the output has a single initial vertex and pairwise-disjoint
sibling out-labels.  ``to_single_outputting`` splits action vertices so
each reachable one carries at most one singleton-labeled out-edge.  Both
preserve the induced language; composing them (split first, then
determinize) yields a directly implementable filter exactly when the
input filter is deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from . import labels as lb
from .errors import (
    InfiniteActionSpaceError,
    NotDeterministicError,
    ValidationError,
)
from .graphs import ACTION, Edge, PGraph, Verdict, require_valid


@dataclass(frozen=True)
class CorrespondenceMap:
    """For each output vertex, the set of input vertices it stands for."""

    mapping: dict

    def __getitem__(self, v):
        return self.mapping[v]

    def to_json(self):
        return {v: sorted(members) for v, members in sorted(self.mapping.items())}


def _set_name(members: frozenset, taken: set) -> str:
    name = "{" + ",".join(sorted(members)) + "}"
    while name in taken:
        name += "'"
    return name


def to_state_determined(g: PGraph):
    """Powerset conversion to a state-determined presentation.

    Returns the converted graph and the correspondence map from each output
    vertex to the set of input vertices it represents.  Only the forward-
    reachable part of the powerset is built, so unreachable input vertices
    are dropped.
    """
    require_valid(g)
    kind_of = g.kind_of
    start = frozenset(g.initial)
    names: dict = {}
    taken: set = set()

    def name_for(members: frozenset) -> str:
        if members not in names:
            nm = _set_name(members, taken)
            names[members] = nm
            taken.add(nm)
        return names[members]

    start_name = name_for(start)
    vertices = {start_name: kind_of[next(iter(start))]}
    corresp = {start_name: start}
    edges = []
    queue = deque([start])
    seen = {start}
    while queue:
        members = queue.popleft()
        src_name = names[members]
        out = [e for v in sorted(members) for e in g.out_edges.get(v, [])]
        if not out:
            continue
        blocks = lb.refine_labels([e.label for e in out])
        # Group refined blocks by the successor set they reach; one edge per
        # distinct successor set keeps the output small and canonical.
        by_target: dict = {}
        for blk in blocks:
            rep = lb.representative(blk)
            targets = frozenset(e.dst for e in out if lb.contains(e.label, rep))
            if not targets:
                continue
            if targets in by_target:
                by_target[targets] = lb.union(by_target[targets], blk)
            else:
                by_target[targets] = blk
        for targets in sorted(by_target, key=lambda t: sorted(t)):
            blk = by_target[targets]
            dst_name = name_for(targets)
            if targets not in seen:
                seen.add(targets)
                vertices[dst_name] = kind_of[next(iter(targets))]
                corresp[dst_name] = targets
                queue.append(targets)
            edges.append(Edge(src_name, dst_name, blk))
    out_graph = PGraph(
        g.action_space,
        g.observation_space,
        vertices,
        edges,
        {start_name},
    )
    return out_graph, CorrespondenceMap(corresp)


def is_state_determined(g: PGraph) -> bool:
    if len(g.initial) != 1:
        return False
    for v, _ in g.vertices:
        out = g.out_labels(v)
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                if not lb.is_empty(lb.intersection(out[i], out[j])):
                    return False
    return True


def _require_finite_actions(g: PGraph):
    if not isinstance(g.action_space, lb.FiniteSpace):
        raise InfiniteActionSpaceError(
            "this operation needs a finite action space"
        )


def to_single_outputting(f: PGraph) -> PGraph:
    """Split action vertices until every reachable one emits one singleton.

    Each reachable action vertex is replaced by one copy per (event, target)
    pair of its out-edges; incoming observation edges are duplicated onto
    every copy.  Action sinks are kept as-is: they already emit nothing, and
    dropping them would cut the observation sequences that end there.
    """
    require_valid(f)
    _require_finite_actions(f)
    reach = f.reachable()
    kind_of = f.kind_of
    taken = {v for v in reach}
    vertices = {}
    edges = []
    initial = set()

    # Observation vertices survive unchanged.
    for v in sorted(reach):
        if kind_of[v] != ACTION:
            vertices[v] = kind_of[v]

    split_names: dict = {}

    def split_name(va: str, event: str, dst: str) -> str:
        key = (va, event, dst)
        if key not in split_names:
            nm = f"{va}@{event}>{dst}"
            while nm in taken:
                nm += "'"
            taken.add(nm)
            split_names[key] = nm
        return split_names[key]

    splits_of: dict = {}
    for va in sorted(reach):
        if kind_of[va] != ACTION:
            continue
        outs = f.out_edges.get(va, [])
        if not outs:
            vertices[va] = ACTION  # action sink: keep
            splits_of[va] = [va]
            continue
        mine = []
        for e in outs:
            events = lb.enumerate_events(e.label)
            if events is None:
                raise InfiniteActionSpaceError(
                    f"action label on {va!r} is not finitely enumerable"
                )
            for ev in events:
                nm = split_name(va, ev, e.dst)
                vertices[nm] = ACTION
                edges.append(Edge(nm, e.dst, lb.FiniteLabel(ACTION, [ev])))
                mine.append(nm)
        splits_of[va] = sorted(set(mine))

    for e in f.edges:
        if e.src not in reach or kind_of[e.src] == ACTION:
            continue
        if e.dst not in reach:
            continue
        for nm in splits_of.get(e.dst, []):
            edges.append(Edge(e.src, nm, e.label))

    for v in f.initial:
        if kind_of[v] == ACTION:
            initial.update(splits_of.get(v, []))
        else:
            initial.add(v)

    return PGraph(f.action_space, f.observation_space, vertices, edges, initial)


def is_single_outputting(f: PGraph) -> bool:
    """Every reachable action vertex has at most one out-edge, singleton-labeled."""
    reach = f.reachable()
    for v in reach:
        if f.kind_of[v] != ACTION:
            continue
        out = f.out_edges.get(v, [])
        if len(out) > 1:
            return False
        if out and lb.singleton_event(out[0].label) is None:
            return False
    return True


def _single_outputting_violation(f: PGraph) -> Optional[str]:
    for v in sorted(f.reachable()):
        if f.kind_of[v] != ACTION:
            continue
        out = f.out_edges.get(v, [])
        if len(out) > 1 or (out and lb.singleton_event(out[0].label) is None):
            return v
    return None


def _shortest_trace_to(g: PGraph, target: str) -> tuple:
    """Events of a shortest path from the initial vertex to ``target``.

    Assumes a state-determined graph, so the initial set is a singleton.
    """
    start = next(iter(g.initial))
    parents = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        if v == target:
            break
        for e in g.out_edges.get(v, []):
            if e.dst not in parents:
                parents[e.dst] = (v, lb.representative(e.label))
                queue.append(e.dst)
    events = []
    v = target
    while parents[v] is not None:
        v, ev = parents[v]
        events.append(ev)
    return tuple(reversed(events))


def is_deterministic_filter(f: PGraph) -> Verdict:
    """Whether every observation-terminal execution has at most one successor.

    Decided by determinizing and checking the single-outputting property of
    the result.  A failing verdict carries an observation-terminal witness
    sequence whose successor outputs differ.
    """
    _require_finite_actions(f)
    sd, _ = to_state_determined(f)
    v = _single_outputting_violation(sd)
    if v is None:
        return Verdict(holds=True, detail="state-determined form is single-outputting")
    witness = _shortest_trace_to(sd, v)
    outputs = sorted(
        {str(ev) for e in sd.out_edges[v] for ev in (lb.enumerate_events(e.label) or [])}
    )
    return Verdict(
        holds=False,
        witness=witness,
        detail=f"after this sequence the filter can emit any of {outputs}",
    )


def _merge_equivalent_action_vertices(g: PGraph) -> PGraph:
    """Collapse action vertices with identical out-edge sets, to fixpoint."""
    current = g
    while True:
        sig: dict = {}
        rename: dict = {}
        for v, kind in current.vertices:
            if kind != ACTION:
                continue
            key = tuple(
                sorted(
                    (lb._label_sort_key(e.label), e.dst)
                    for e in current.out_edges.get(v, [])
                )
            )
            if key in sig:
                rename[v] = sig[key]
            else:
                sig[key] = v
        if not rename:
            return current
        vertices = [(v, k) for v, k in current.vertices if v not in rename]
        seen = set()
        edges = []
        for e in current.edges:
            src = rename.get(e.src, e.src)
            dst = rename.get(e.dst, e.dst)
            if src in rename:
                continue  # merged-away vertex; its edges exist on the keeper
            marker = (src, dst, lb._label_sort_key(e.label))
            if marker in seen:
                continue
            seen.add(marker)
            edges.append(Edge(src, dst, e.label))
        initial = {rename.get(v, v) for v in current.initial}
        current = PGraph(
            current.action_space, current.observation_space, vertices, edges, initial
        )


def to_practicable(f: PGraph) -> PGraph:
    """Convert a deterministic filter to a state-determined, single-outputting
    equivalent.

    Splitting outputs first and determinizing second matters: each
    conversion can break the property the other establishes, but in this
    order the determinization only ever superposes action vertices that
    emit the same event, which a deterministic filter guarantees.
    """
    verdict = is_deterministic_filter(f)
    if not verdict.holds:
        raise NotDeterministicError(
            f"filter is not deterministic: {verdict.detail} "
            f"(witness {list(verdict.witness or ())})"
        )
    so = to_single_outputting(f)
    sd, _ = to_state_determined(so)
    out = _merge_equivalent_action_vertices(sd)
    if not (is_state_determined(out) and is_single_outputting(out)):
        raise NotDeterministicError(
            "internal: practicable conversion failed its final property check"
        )
    return out
