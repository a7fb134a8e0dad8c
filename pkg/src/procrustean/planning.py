"""Plans, planning problems, the solves check, and homomorphic solutions.

A planning problem is a graph with a goal region; a plan is a graph with
a termination region.  A plan solves a problem when their joint behavior
is length-bounded and mutually safe, every joint execution extends to one
that reaches the termination region, and termination can only happen
while the problem side sits in its goal region.  All checks run on
state-determined presentations, whose goal region maps by an
all-members rule and termination region by an any-member rule.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from . import labels as lb
from . import maps as mp
from .errors import (
    HomomorphicDerivationError,
    NotAkinError,
    NotASolutionError,
    NotStateDeterminedError,
)
from .graphs import (
    ACTION,
    Edge,
    PGraph,
    check_akin,
    find_product_cycle,
    joint_product,
    union_with_renames,
)
from .presentations import is_state_determined, to_state_determined


@dataclass(frozen=True)
class PlanningProblem:
    graph: PGraph
    goal: frozenset

    def __init__(self, graph, goal):
        goal = frozenset(goal)
        unknown = goal - set(graph.kind_of)
        if unknown:
            raise ValueError(f"goal region references unknown vertices {sorted(unknown)}")
        object.__setattr__(self, "graph", graph)
        object.__setattr__(self, "goal", goal)


@dataclass(frozen=True)
class Plan:
    graph: PGraph
    term: frozenset

    def __init__(self, graph, term):
        term = frozenset(term)
        unknown = term - set(graph.kind_of)
        if unknown:
            raise ValueError(
                f"termination region references unknown vertices {sorted(unknown)}"
            )
        object.__setattr__(self, "graph", graph)
        object.__setattr__(self, "term", term)


NOT_AKIN = "NotAkin"
NOT_FINITE = "NotFinite"
NOT_SAFE = "NotSafe"
DEAD_END = "DeadEnd"
TERMINATES_OUTSIDE_GOAL = "TerminatesOutsideGoal"


@dataclass(frozen=True)
class SolveVerdict:
    solves: bool
    failure: Optional[str] = None
    witness: Optional[tuple] = None
    detail: str = ""

    def to_json(self):
        return {
            "holds": self.solves,
            "failure": self.failure,
            "witness": None if self.witness is None else [repr(e) for e in self.witness],
            "detail": self.detail,
        }


# ---------------------------------------------------------------------------
# State-determined presentations of plans and problems
# ---------------------------------------------------------------------------


def problem_to_state_determined(w: PlanningProblem) -> PlanningProblem:
    """Goal carries over only where every represented vertex was a goal."""
    g, corr = to_state_determined(w.graph)
    goal = {v for v in g.kind_of if corr[v] <= w.goal}
    return PlanningProblem(g, goal)


def plan_to_state_determined(p: Plan) -> Plan:
    """Termination carries over where any represented vertex could terminate."""
    g, corr = to_state_determined(p.graph)
    term = {v for v in g.kind_of if corr[v] & p.term}
    return Plan(g, term)


def plan_union(p: Plan, q: Plan) -> Plan:
    g, ren_p, ren_q = union_with_renames(p.graph, q.graph)
    term = {ren_p[v] for v in p.term} | {ren_q[v] for v in q.term}
    return Plan(g, term)


def plan_union_state_determined(p: Plan, q: Plan) -> Plan:
    """Union, then determinize, with the termination rule evaluated per side.

    An output vertex terminates iff the vertices it represents from one
    side are nonempty and all lie in that side's termination region.
    """
    g, ren_p, ren_q = union_with_renames(p.graph, q.graph)
    p_ids = set(ren_p.values())
    q_ids = set(ren_q.values())
    p_term = {ren_p[v] for v in p.term}
    q_term = {ren_q[v] for v in q.term}
    sd, corr = to_state_determined(g)
    term = set()
    for v in sd.kind_of:
        members = corr[v]
        ps = members & p_ids
        qs = members & q_ids
        if (ps and ps <= p_term) or (qs and qs <= q_term):
            term.add(v)
    return Plan(sd, term)


# ---------------------------------------------------------------------------
# The solves check
# ---------------------------------------------------------------------------


def solves(p: Plan, w: PlanningProblem) -> SolveVerdict:
    """Forward search over the joint product, applying every required check."""
    try:
        check_akin(p.graph, w.graph)
    except NotAkinError as exc:
        return SolveVerdict(False, failure=NOT_AKIN, detail=str(exc))

    psd = plan_to_state_determined(p)
    wsd = problem_to_state_determined(w)
    prod = joint_product(psd.graph, wsd.graph)
    plan_g, world_g = prod.a, prod.b

    for node in prod.nodes:
        v, u = node
        kind = plan_g.kind_of[v]
        if kind == ACTION:
            gap = lb.difference(plan_g.out_union(v), world_g.out_union(u))
            if not lb.is_empty(gap):
                ev = lb.representative(gap)
                return SolveVerdict(
                    False,
                    failure=NOT_SAFE,
                    witness=prod.path_to(node) + (ev,),
                    detail=f"plan may choose {ev!r} at {node}, the problem cannot take it",
                )
        else:
            gap = lb.difference(world_g.out_union(u), plan_g.out_union(v))
            if not lb.is_empty(gap):
                ev = lb.representative(gap)
                return SolveVerdict(
                    False,
                    failure=NOT_SAFE,
                    witness=prod.path_to(node) + (ev,),
                    detail=f"problem may produce {ev!r} at {node}, the plan is not ready",
                )
        v_sink = plan_g.is_sink(v)
        u_sink = world_g.is_sink(u)
        if v_sink and v not in psd.term:
            return SolveVerdict(
                False,
                failure=DEAD_END,
                witness=prod.path_to(node),
                detail=f"plan halts at non-terminating vertex {v!r}",
            )
        if u_sink and u not in wsd.goal:
            return SolveVerdict(
                False,
                failure=DEAD_END,
                witness=prod.path_to(node),
                detail=f"problem halts outside the goal at {u!r}",
            )
        if v in psd.term and u not in wsd.goal:
            return SolveVerdict(
                False,
                failure=TERMINATES_OUTSIDE_GOAL,
                witness=prod.path_to(node),
                detail=f"plan may terminate at {v!r} while the problem is at {u!r}",
            )

    cyc = find_product_cycle(prod)
    if cyc is not None:
        node, cycle = cyc
        return SolveVerdict(
            False,
            failure=NOT_FINITE,
            witness=prod.path_to(node) + cycle,
            detail=f"joint behavior can cycle through {node}",
        )

    # With safety, acyclicity, and sink checks in hand, every joint execution
    # is a prefix of one reaching the termination region; verify explicitly.
    term_nodes = {n for n in prod.nodes if n[0] in psd.term}
    can_reach = set(term_nodes)
    changed = True
    while changed:
        changed = False
        for n in prod.nodes:
            if n in can_reach:
                continue
            if any(nx in can_reach for _, nx in prod.succ[n]):
                can_reach.add(n)
                changed = True
    for n in prod.nodes:
        if n not in can_reach:
            return SolveVerdict(
                False,
                failure=DEAD_END,
                witness=prod.path_to(n),
                detail=f"joint pair {n} cannot reach any terminating pair",
            )
    return SolveVerdict(True, detail="all joint executions terminate in the goal")


# ---------------------------------------------------------------------------
# Homomorphic solutions
# ---------------------------------------------------------------------------


def _pair_product(pg: PGraph, wg: PGraph):
    """Reachable vertex pairs of two (possibly nondeterministic) graphs.

    Unlike the state-determined joint product, one event may lead to several
    successors on either side; all pair combinations are explored.
    """
    starts = {(v, u) for v in pg.initial for u in wg.initial}
    succ: dict = {}
    queue = deque(sorted(starts))
    seen = set(starts)
    while queue:
        node = queue.popleft()
        v, u = node
        out_p = pg.out_labels(v)
        out_w = wg.out_labels(u)
        edges = []
        if out_p or out_w:
            for blk in lb.refine_labels(out_p + out_w):
                ev = lb.representative(blk)
                nxt_p = sorted(pg.step(frozenset([v]), ev))
                nxt_w = sorted(wg.step(frozenset([u]), ev))
                for np_ in nxt_p:
                    for nw in nxt_w:
                        edges.append((ev, (np_, nw)))
        succ[node] = edges
        for _, nxt in edges:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return starts, succ, seen


def homomorphic_relation(p: Plan, w: PlanningProblem) -> frozenset:
    """All (plan vertex, problem vertex) pairs co-reachable by a joint execution."""
    _, _, seen = _pair_product(p.graph, w.graph)
    return frozenset(seen)


def is_homomorphic_solution(p: Plan, w: PlanningProblem) -> bool:
    """True when the co-reachability relation is a function on plan vertices."""
    worlds: dict = {}
    for v, u in homomorphic_relation(p, w):
        worlds.setdefault(v, set()).add(u)
    return all(len(us) <= 1 for us in worlds.values())


def derive_homomorphic_solution(p: Plan, w: PlanningProblem) -> Plan:
    """Rebuild a solution over the problem's own vertices so the
    co-reachability relation becomes a function.

    For each problem vertex, the construction looks at final visits: pairs
    from which no joint continuation returns to that problem vertex.  The
    plan edges available at those pairs say which events the new plan may
    keep; the problem's own edges, restricted to those events, become the
    new plan's edges.
    """
    if not is_state_determined(w.graph):
        raise NotStateDeterminedError(
            "derivation is defined over a state-determined problem; convert first"
        )
    base = solves(p, w)
    if not base.solves:
        raise NotASolutionError(
            f"the given plan does not solve the problem ({base.failure}: {base.detail})"
        )
    starts, succ, seen = _pair_product(p.graph, w.graph)

    # last_visits[u] = pairs (v, u) with no nonempty path back to problem vertex u.
    reach_cache: dict = {}

    def reaches_world_again(node, target_world) -> bool:
        frontier = [nxt for _, nxt in succ[node]]
        visited = set(frontier)
        while frontier:
            cur = frontier.pop()
            if cur[1] == target_world:
                return True
            for _, nxt in succ[cur]:
                if nxt not in visited:
                    visited.add(nxt)
                    frontier.append(nxt)
        return False

    last_visits: dict = {}
    for node in sorted(seen):
        v, u = node
        if not reaches_world_again(node, u):
            last_visits.setdefault(u, []).append(node)

    wg = w.graph
    kept_edges = []
    for u in sorted(wg.kind_of):
        finals = last_visits.get(u, [])
        if not finals:
            continue
        allowed = lb.empty_label_for(
            wg.space_for(wg.kind_of[u]), wg.kind_of[u]
        )
        for v, _ in finals:
            for e in p.graph.out_edges.get(v, []):
                allowed = lb.union(allowed, e.label)
        for e in wg.out_edges.get(u, []):
            cut = lb.intersection(e.label, allowed)
            if not lb.is_empty(cut):
                kept_edges.append(Edge(e.src, e.dst, cut))
    term = {
        u
        for u, finals in last_visits.items()
        if any(v in p.term for v, _ in finals)
    }
    derived = Plan(
        PGraph(
            wg.action_space,
            wg.observation_space,
            dict(wg.vertices),
            kept_edges,
            wg.initial,
        ),
        term,
    )
    check = solves(derived, w)
    if not check.solves:
        raise HomomorphicDerivationError(
            f"derived plan fails the solves check ({check.failure}: {check.detail}); "
            "some problem vertex may lack a final joint visit"
        )
    if not is_homomorphic_solution(derived, w):
        raise HomomorphicDerivationError(
            "derived plan is not homomorphic; the construction's assumptions "
            "do not hold for this input"
        )
    return derived


# ---------------------------------------------------------------------------
# Destructiveness on plans
# ---------------------------------------------------------------------------


def map_destructive_on_plan(h: mp.LabelMap, p: Plan, w: PlanningProblem) -> bool:
    """True when the mapped plan no longer solves the mapped problem."""
    hp = Plan(mp.apply_to_pgraph(h, p.graph), p.term)
    hw = PlanningProblem(mp.apply_to_pgraph(h, w.graph), w.goal)
    return not solves(hp, hw).solves


# ---------------------------------------------------------------------------
# Bounded plan synthesis
# ---------------------------------------------------------------------------

_INF = None  # sentinel for "no bounded strategy"


def synthesize_plan(w: PlanningProblem, depth_bound: int) -> Optional[Plan]:
    """Bounded worst-case search for a solving plan over the determinized
    problem: the plan picks one action edge per action vertex and must cover
    every observation edge.

    Termination is only placed at goal vertices where stopping is safe:
    action vertices (the plan simply offers no action) and sinks.  Returns
    None when no strategy exists within the bound; that is conclusive for
    the bound but not beyond it.

    The returned plan, if any, is re-verified against the original problem.
    """
    if depth_bound < 1:
        raise ValueError("depth bound must be at least 1")
    wsd = problem_to_state_determined(w)
    g = wsd.graph
    verts = list(g.kind_of)

    def terminal(v) -> bool:
        return v in wsd.goal and (g.kind_of[v] == ACTION or g.is_sink(v))

    cost = {v: (0 if terminal(v) else _INF) for v in verts}
    changed = True
    while changed:
        changed = False
        for v in verts:
            if cost[v] == 0:
                continue
            out = g.out_edges.get(v, [])
            if not out:
                continue  # non-goal sink stays unreachable
            child_costs = [cost[e.dst] for e in out]
            if g.kind_of[v] == ACTION:
                viable = [c for c in child_costs if c is not _INF]
                new = (1 + min(viable)) if viable else _INF
            else:
                if any(c is _INF for c in child_costs):
                    new = _INF
                else:
                    new = 1 + max(child_costs)
            if new is not _INF and new > depth_bound:
                new = _INF
            if new != cost[v] and (cost[v] is _INF or (new is not _INF and new < cost[v])):
                cost[v] = new
                changed = True

    root = next(iter(g.initial))
    if cost[root] is _INF:
        return None

    keep_vertices = {}
    keep_edges = []
    term = set()
    queue = deque([root])
    seen = {root}
    while queue:
        v = queue.popleft()
        keep_vertices[v] = g.kind_of[v]
        if terminal(v):
            term.add(v)
            continue  # plan stops here: offer nothing further
        out = g.out_edges.get(v, [])
        if g.kind_of[v] == ACTION:
            ranked = sorted(
                (e for e in out if cost[e.dst] is not _INF),
                key=lambda e: (
                    cost[e.dst],
                    _label_size(e.label),
                    lb._label_sort_key(e.label),
                ),
            )
            chosen = [ranked[0]]
        else:
            chosen = out
        for e in chosen:
            keep_edges.append(e)
            if e.dst not in seen:
                seen.add(e.dst)
                queue.append(e.dst)

    plan = Plan(
        PGraph(g.action_space, g.observation_space, keep_vertices, keep_edges, {root}),
        term,
    )
    verdict = solves(plan, w)
    if not verdict.solves:
        raise AssertionError(
            f"synthesized plan failed verification: {verdict.failure}: {verdict.detail}"
        )
    return plan


def _label_size(label):
    listed = lb.enumerate_events(label)
    return len(listed) if listed is not None else 0
