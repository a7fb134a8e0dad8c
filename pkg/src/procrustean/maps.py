"""Per-event maps modeling sensor and actuator degradation.

A label map sends each source event to a nonempty set of target events
and extends pointwise to labels (as the union of the per-event images)
and to whole graphs (by rewriting every edge label).  Two families are
supported exactly: finite tables, and piecewise-affine interval maps
whose image at x is the interval [p1(x), p2(x)].  All arithmetic is
rational, so images and preimages are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

from . import labels as lb
from .errors import (
    NonComposableError,
    UnmappedEventError,
    UnmappedKindError,
    VariantMismatchError,
)
from .labels import (
    ACTION,
    OBSERVATION,
    EventValue,
    FiniteLabel,
    FiniteSpace,
    IntervalLabel,
    Label,
    ProductLabel,
    ProductSpace,
    RealSpace,
    Space,
    as_fraction,
)

Affine = tuple  # (slope, intercept)


def _aff(slope, intercept) -> Affine:
    return (as_fraction(slope), as_fraction(intercept))


def _aff_at(aff: Affine, x: Fraction) -> Fraction:
    return aff[0] * x + aff[1]


@dataclass(frozen=True)
class BoundPair:
    """Lower and upper affine bounds of a set-valued map on one region."""

    lo: Affine
    hi: Affine

    def __init__(self, lo, hi):
        object.__setattr__(self, "lo", _aff(*lo))
        object.__setattr__(self, "hi", _aff(*hi))

    @property
    def pointwise(self) -> bool:
        return self.lo == self.hi


def _label_pieces(label: IntervalLabel):
    """Maximal pieces of an interval label as (lo, lo_closed, hi, hi_closed)."""
    pts, ifl, pfl = label.endpoints, label.interval_flags, label.endpoint_flags
    n = len(pts)
    pieces = []
    cur = None
    for j in range(n):
        if ifl[j] and cur is None:
            cur = (pts[j - 1] if j > 0 else None, False)
        elif not ifl[j] and cur is not None:
            pieces.append((cur[0], cur[1], pts[j - 1], True))
            cur = None
        if pfl[j]:
            if cur is None:
                cur = (pts[j], True)
        elif cur is not None:
            pieces.append((cur[0], cur[1], pts[j], False))
            cur = None
    if ifl[n] and cur is None:
        cur = (pts[n - 1] if n > 0 else None, False)
    elif not ifl[n] and cur is not None:
        pieces.append((cur[0], cur[1], pts[n - 1], True))
        cur = None
    if cur is not None:
        pieces.append((cur[0], cur[1], None, False))
    return pieces


def _affine_range(aff: Affine, lo, lo_c, hi, hi_c):
    """Exact range of an affine function over one interval piece."""
    s, t = aff
    if s == 0:
        return (t, True, t, True)
    at_lo = (None, False) if lo is None else (_aff_at(aff, lo), lo_c)
    at_hi = (None, False) if hi is None else (_aff_at(aff, hi), hi_c)
    if s > 0:
        return (*at_lo, *at_hi)
    return (*at_hi, *at_lo)


def _solve_affine(aff: Affine, bound, strict: bool, direction: str):
    """x-set where aff(x) <= bound (direction 'le') or >= bound ('ge').

    Returns a piece tuple, "all", or "none".  A None bound means no
    constraint.
    """
    if bound is None:
        return "all"
    s, t = aff
    bound = as_fraction(bound)
    if s == 0:
        if direction == "le":
            ok = t < bound if strict else t <= bound
        else:
            ok = t > bound if strict else t >= bound
        return "all" if ok else "none"
    x0 = (bound - t) / s
    want_le = (direction == "le") == (s > 0)
    if want_le:
        return (None, False, x0, not strict)
    return (x0, not strict, None, False)


class PiecewiseAffineMap:
    """A set-valued map on the reals given by piecewise-affine bounds.

    Stored as strictly increasing breakpoints, one bound pair per open
    region between them (including the two unbounded ends) and one per
    breakpoint.  This form makes images, preimages, and composition exact
    even where pieces meet.
    """

    def __init__(self, breakpoints, open_pieces, point_pieces):
        self.breakpoints = tuple(as_fraction(b) for b in breakpoints)
        self.open_pieces = tuple(open_pieces)
        self.point_pieces = tuple(point_pieces)
        if any(a >= b for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.open_pieces) != len(self.breakpoints) + 1:
            raise ValueError("need one open piece per region")
        if len(self.point_pieces) != len(self.breakpoints):
            raise ValueError("need one point piece per breakpoint")
        for k, pair in enumerate(self.open_pieces):
            lo = self.breakpoints[k - 1] if k > 0 else None
            hi = self.breakpoints[k] if k < len(self.breakpoints) else None
            if not _pair_ordered(pair, lo, hi):
                raise ValueError(f"lower bound exceeds upper bound on region {k}")
        for b, pair in zip(self.breakpoints, self.point_pieces):
            if _aff_at(pair.lo, b) > _aff_at(pair.hi, b):
                raise ValueError(f"lower bound exceeds upper bound at {b}")

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseAffineMap)
            and self.breakpoints == other.breakpoints
            and self.open_pieces == other.open_pieces
            and self.point_pieces == other.point_pieces
        )

    def __hash__(self):
        return hash((self.breakpoints, self.open_pieces, self.point_pieces))

    @classmethod
    def from_segments(cls, segments: Sequence) -> "PiecewiseAffineMap":
        """Build from [lo, hi) segments covering the whole line.

        Each segment is (lo, hi, p1, p2) with affine (slope, intercept)
        pairs; the first lo and last hi must be None.  A breakpoint belongs
        to the segment it starts.
        """
        segs = [
            (
                None if lo is None else as_fraction(lo),
                None if hi is None else as_fraction(hi),
                BoundPair(p1, p2),
            )
            for lo, hi, p1, p2 in segments
        ]
        segs.sort(key=lambda s: (s[0] is not None, s[0]))
        if not segs or segs[0][0] is not None or segs[-1][1] is not None:
            raise ValueError("segments must cover the whole real line")
        for (l1, h1, _), (l2, h2, _) in zip(segs, segs[1:]):
            if h1 != l2:
                raise ValueError("segments must tile the line without gaps")
        breakpoints = [s[0] for s in segs[1:]]
        open_pieces = [s[2] for s in segs]
        point_pieces = [s[2] for s in segs[1:]]
        return cls(breakpoints, open_pieces, point_pieces)

    @property
    def pointwise(self) -> bool:
        return all(p.pointwise for p in self.open_pieces) and all(
            p.pointwise for p in self.point_pieces
        )

    def piece_at(self, x: Fraction) -> BoundPair:
        from bisect import bisect_left

        i = bisect_left(self.breakpoints, x)
        if i < len(self.breakpoints) and self.breakpoints[i] == x:
            return self.point_pieces[i]
        return self.open_pieces[i]

    def regions(self):
        """Yield ('open', lo, hi, pair) and ('point', b, b, pair) in order."""
        bps = self.breakpoints
        for k, pair in enumerate(self.open_pieces):
            lo = bps[k - 1] if k > 0 else None
            hi = bps[k] if k < len(bps) else None
            yield ("open", lo, hi, pair)
            if k < len(bps):
                yield ("point", bps[k], bps[k], self.point_pieces[k])

    # -- operations ---------------------------------------------------------

    def image_of_event(self, x, kind: str) -> IntervalLabel:
        x = as_fraction(x)
        pair = self.piece_at(x)
        return lb.interval_piece(kind, _aff_at(pair.lo, x), True, _aff_at(pair.hi, x), True)

    def image_of_label(self, label: IntervalLabel) -> IntervalLabel:
        kind = label.kind
        out = lb.empty_interval(kind)
        for rtype, lo, hi, pair in self.regions():
            if rtype == "point":
                if lb.contains(label, lo):
                    out = lb.union(out, lb.interval_piece(
                        kind, _aff_at(pair.lo, lo), True, _aff_at(pair.hi, lo), True
                    ))
                continue
            region = lb.interval_piece(kind, lo, False, hi, False)
            sliced = lb.intersection(label, region)
            for plo, plc, phi, phc in _label_pieces(sliced):
                vlo, vlc, _, _ = _affine_range(pair.lo, plo, plc, phi, phc)
                _, _, vhi, vhc = _affine_range(pair.hi, plo, plc, phi, phc)
                out = lb.union(out, lb.interval_piece(kind, vlo, vlc, vhi, vhc))
        return out

    def preimage_of_label(self, target: IntervalLabel, kind: str) -> IntervalLabel:
        out = lb.empty_interval(kind)
        target_pieces = _label_pieces(target)
        for rtype, lo, hi, pair in self.regions():
            if rtype == "point":
                img = lb.interval_piece(
                    target.kind, _aff_at(pair.lo, lo), True, _aff_at(pair.hi, lo), True
                )
                if not lb.is_empty(lb.intersection(img, target)):
                    out = lb.union(out, lb.point_label(kind, lo))
                continue
            region = lb.interval_piece(kind, lo, False, hi, False)
            for tlo, tlc, thi, thc in target_pieces:
                # [p1(x), p2(x)] meets the piece iff p1(x) is below its top
                # and p2(x) is above its bottom.
                c1 = _solve_affine(pair.lo, thi, strict=not thc, direction="le")
                c2 = _solve_affine(pair.hi, tlo, strict=not tlc, direction="ge")
                xset = region
                for c in (c1, c2):
                    if c == "all":
                        continue
                    if c == "none":
                        xset = lb.empty_interval(kind)
                        break
                    xset = lb.intersection(xset, lb.interval_piece(kind, *c))
                out = lb.union(out, xset)
        return out

    def injective(self) -> Optional[bool]:
        """Exact when pointwise; unknown (None) for genuinely set-valued maps."""
        if not self.pointwise:
            return None
        images = []
        for rtype, lo, hi, pair in self.regions():
            if rtype == "open" and pair.lo[0] == 0:
                return False  # constant on a nondegenerate region
            if rtype == "open":
                vlo, vlc, vhi, vhc = _affine_range(pair.lo, lo, False, hi, False)
                images.append(lb.interval_piece(OBSERVATION, vlo, vlc, vhi, vhc))
            else:
                images.append(lb.point_label(OBSERVATION, _aff_at(pair.lo, lo)))
        for i in range(len(images)):
            for j in range(i + 1, len(images)):
                if not lb.is_empty(lb.intersection(images[i], images[j])):
                    return False
        return True


def _pair_ordered(pair: BoundPair, lo, hi) -> bool:
    d_slope = pair.hi[0] - pair.lo[0]
    d_icept = pair.hi[1] - pair.lo[1]
    if lo is None and hi is None:
        return d_slope == 0 and d_icept >= 0
    if lo is None:
        return d_slope <= 0 and d_slope * hi + d_icept >= 0
    if hi is None:
        return d_slope >= 0 and d_slope * lo + d_icept >= 0
    return d_slope * lo + d_icept >= 0 and d_slope * hi + d_icept >= 0


class FiniteEventMap:
    """A total table from source events to nonempty finite sets of target ids."""

    def __init__(self, table):
        items = []
        for key, value in (table.items() if hasattr(table, "items") else table):
            key = _normalize_key(key)
            ids = frozenset(value)
            if not ids:
                raise ValueError(f"image of {key!r} must be nonempty")
            for v in ids:
                if not isinstance(v, str):
                    raise ValueError("finite map images must be sets of ids")
            items.append((key, ids))
        self.table = dict(items)
        if len(self.table) != len(items):
            raise ValueError("duplicate keys in finite map table")

    def __eq__(self, other):
        return isinstance(other, FiniteEventMap) and self.table == other.table

    def __hash__(self):
        return hash(frozenset(self.table.items()))

    def domain(self):
        return set(self.table)

    def image_of_event(self, e, kind: str) -> FiniteLabel:
        e = _normalize_key(e)
        if e not in self.table:
            raise UnmappedEventError(f"no table entry for event {e!r}")
        return FiniteLabel(kind, self.table[e])

    def image_of_label(self, label: Label) -> FiniteLabel:
        events = lb.enumerate_events(label)
        if events is None:
            raise UnmappedEventError(
                "a finite table cannot map a label that is not finitely enumerable"
            )
        out = set()
        for e in events:
            out |= self.image_of_event(e, label.kind).events
        return FiniteLabel(label.kind, out)

    def preimage_of_label(self, target: FiniteLabel, kind: str) -> Label:
        if not isinstance(target, FiniteLabel):
            raise VariantMismatchError("finite map targets are finite labels")
        hits = [k for k, img in self.table.items() if img & target.events]
        if not hits:
            # Infer the empty label's variant from the table's key type.
            sample = next(iter(self.table), "")
            if isinstance(sample, Fraction):
                return lb.empty_interval(kind)
            if isinstance(sample, tuple):
                return ProductLabel(kind, ())
            return FiniteLabel(kind, ())
        return _label_from_events(kind, hits)

    def injective(self) -> bool:
        entries = sorted(self.table.items(), key=lambda kv: str(kv[0]))
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                if entries[i][1] & entries[j][1]:
                    return False
        return True


def _normalize_key(key):
    if isinstance(key, str):
        return key
    if isinstance(key, (int, float, Fraction)) and not isinstance(key, bool):
        return as_fraction(key)
    if isinstance(key, (tuple, list)):
        return tuple(_normalize_key(k) for k in key)
    raise ValueError(f"cannot use {key!r} as a finite map key")


def _label_from_events(kind: str, events) -> Label:
    events = list(events)
    if all(isinstance(e, str) for e in events):
        return FiniteLabel(kind, events)
    if all(isinstance(e, Fraction) for e in events):
        out = lb.empty_interval(kind)
        for e in events:
            out = lb.union(out, lb.point_label(kind, e))
        return out
    if all(isinstance(e, tuple) for e in events):
        terms = []
        for e in events:
            terms.append(tuple(_label_from_events(kind, [part]) for part in e))
        return ProductLabel(kind, terms)
    raise VariantMismatchError("mixed event value types in one event set")


class IdentityMap:
    def __eq__(self, other):
        return isinstance(other, IdentityMap)

    def __hash__(self):
        return hash(IdentityMap)

    def image_of_event(self, e, kind: str) -> Label:
        return _label_from_events(kind, [_normalize_key(e)])

    def image_of_label(self, label: Label) -> Label:
        return label

    def preimage_of_label(self, target: Label, kind: str) -> Label:
        return target

    def injective(self) -> bool:
        return True


class ProductEventMap:
    """Independent sub-maps applied per dimension of a product space."""

    def __init__(self, dims: Iterable):
        self.dims = tuple(dims)

    def __eq__(self, other):
        return isinstance(other, ProductEventMap) and self.dims == other.dims

    def __hash__(self):
        return hash(self.dims)

    def image_of_event(self, e, kind: str) -> ProductLabel:
        if not isinstance(e, (tuple, list)) or len(e) != len(self.dims):
            raise VariantMismatchError(f"expected a {len(self.dims)}-tuple event")
        term = tuple(d.image_of_event(x, kind) for d, x in zip(self.dims, e))
        return ProductLabel(kind, [term])

    def image_of_label(self, label: ProductLabel) -> ProductLabel:
        if not isinstance(label, ProductLabel):
            raise VariantMismatchError("product maps consume product labels")
        terms = []
        for term in label.terms:
            if len(term) != len(self.dims):
                raise VariantMismatchError("product arity mismatch")
            terms.append(
                tuple(d.image_of_label(s) for d, s in zip(self.dims, term))
            )
        return ProductLabel(label.kind, terms)

    def preimage_of_label(self, target: ProductLabel, kind: str) -> ProductLabel:
        if not isinstance(target, ProductLabel):
            raise VariantMismatchError("product maps invert product labels")
        terms = []
        for term in target.terms:
            terms.append(
                tuple(d.preimage_of_label(s, kind) for d, s in zip(self.dims, term))
            )
        return ProductLabel(kind, terms)

    def injective(self) -> Optional[bool]:
        votes = [d.injective() for d in self.dims]
        if any(v is False for v in votes):
            return False
        if any(v is None for v in votes):
            return None
        return True


SubMap = Union[FiniteEventMap, PiecewiseAffineMap, IdentityMap, ProductEventMap]


@dataclass(frozen=True)
class LabelMap:
    """An action map and an observation map; None means identity."""

    action_map: Optional[SubMap] = None
    observation_map: Optional[SubMap] = None

    def submap_for(self, kind: str) -> SubMap:
        m = self.action_map if kind == ACTION else self.observation_map
        return IdentityMap() if m is None else m


def identity_map() -> LabelMap:
    return LabelMap()


def _apply_submap(sub: SubMap, label: Label) -> Label:
    if isinstance(sub, (IdentityMap, FiniteEventMap)):
        return sub.image_of_label(label)
    if isinstance(sub, PiecewiseAffineMap):
        if not isinstance(label, IntervalLabel):
            raise UnmappedKindError(
                "an interval map cannot consume a non-interval label"
            )
        return sub.image_of_label(label)
    if isinstance(sub, ProductEventMap):
        return sub.image_of_label(label)
    raise UnmappedKindError(f"unsupported sub-map {sub!r}")


def apply_to_label(h: LabelMap, label: Label) -> Label:
    """The image of every event of the label, as one label."""
    return _apply_submap(h.submap_for(label.kind), label)


def image_of_event(h: LabelMap, kind: str, event: EventValue) -> Label:
    return h.submap_for(kind).image_of_event(event, kind)


def preimage(h: LabelMap, kind: str, target: Label) -> Label:
    """All source events of ``kind`` whose image intersects ``target``."""
    return h.submap_for(kind).preimage_of_label(target, kind)


def mapped_space(sub: Optional[SubMap], space: Space) -> Space:
    if sub is None or isinstance(sub, IdentityMap):
        return space
    if isinstance(sub, FiniteEventMap):
        alphabet = set()
        for img in sub.table.values():
            alphabet |= img
        return FiniteSpace(alphabet)
    if isinstance(sub, PiecewiseAffineMap):
        return RealSpace()
    if isinstance(sub, ProductEventMap):
        if not isinstance(space, ProductSpace) or space.arity != len(sub.dims):
            raise UnmappedKindError("product map does not match the source space")
        return ProductSpace(
            mapped_space(d, s) for d, s in zip(sub.dims, space.dims)
        )
    raise UnmappedKindError(f"unsupported sub-map {sub!r}")


def check_total(sub: SubMap, space: Space):
    """A finite table must cover the whole declared source space."""
    if isinstance(sub, FiniteEventMap) and isinstance(space, FiniteSpace):
        missing = space.alphabet - {k for k in sub.table if isinstance(k, str)}
        if missing:
            raise UnmappedEventError(
                f"finite map is not total on the source space: missing {sorted(missing)}"
            )
    if isinstance(sub, ProductEventMap) and isinstance(space, ProductSpace):
        for d, s in zip(sub.dims, space.dims):
            check_total(d, s)


def apply_to_pgraph(h: LabelMap, g):
    """Rewrite every edge label by its image; vertices are untouched."""
    from .graphs import Edge, PGraph

    edges = [Edge(e.src, e.dst, apply_to_label(h, e.label)) for e in g.edges]
    if isinstance(g.action_space, FiniteSpace) and h.action_map is not None:
        check_total(h.action_map, g.action_space)
    if isinstance(g.observation_space, FiniteSpace) and h.observation_map is not None:
        check_total(h.observation_map, g.observation_space)
    return PGraph(
        mapped_space(h.action_map, g.action_space),
        mapped_space(h.observation_map, g.observation_space),
        dict(g.vertices),
        edges,
        g.initial,
    )


def is_injective(h: LabelMap) -> Optional[bool]:
    """Pairwise-disjoint images across distinct events, per sub-map.

    True/False when decidable; None for set-valued interval maps, where
    the question is left open.
    """
    votes = [h.submap_for(ACTION).injective(), h.submap_for(OBSERVATION).injective()]
    if any(v is False for v in votes):
        return False
    if any(v is None for v in votes):
        return None
    return True


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def _compose_finite(outer: FiniteEventMap, inner: FiniteEventMap) -> FiniteEventMap:
    table = {}
    for key, img in inner.table.items():
        acc = set()
        for mid in sorted(img):
            if mid not in outer.table:
                raise NonComposableError(
                    f"outer table lacks an entry for intermediate event {mid!r}"
                )
            acc |= outer.table[mid]
        table[key] = acc
    return FiniteEventMap(table)


def _canonical_pwa(breakpoints, opens, points) -> PiecewiseAffineMap:
    bps, ops, pts = list(breakpoints), list(opens), list(points)
    k = 0
    while k < len(bps):
        same_region = ops[k] == ops[k + 1]
        b = bps[k]
        point_matches = (
            _aff_at(pts[k].lo, b) == _aff_at(ops[k].lo, b)
            and _aff_at(pts[k].hi, b) == _aff_at(ops[k].hi, b)
        )
        if same_region and point_matches:
            del bps[k], pts[k], ops[k + 1]
        else:
            k += 1
    return PiecewiseAffineMap(bps, ops, pts)


def _compose_pwa(outer: PiecewiseAffineMap, inner: PiecewiseAffineMap) -> PiecewiseAffineMap:
    if not (outer.pointwise and inner.pointwise):
        raise NonComposableError(
            "piecewise-affine composition needs pointwise maps (equal bounds)"
        )
    cuts = set(inner.breakpoints)
    for rtype, lo, hi, pair in inner.regions():
        if rtype != "open":
            continue
        s, t = pair.lo
        if s == 0:
            continue
        for b in outer.breakpoints:
            x = (b - t) / s
            inside = (lo is None or x > lo) and (hi is None or x < hi)
            if inside:
                cuts.add(x)
    bps = sorted(cuts)

    def inner_affine_at(x: Fraction) -> Affine:
        return inner.piece_at(x).lo

    def composed_at_region(lo, hi) -> Affine:
        if lo is None and hi is None:
            x0 = Fraction(0)
        elif lo is None:
            x0 = hi - 1
        elif hi is None:
            x0 = lo + 1
        else:
            x0 = (lo + hi) / 2
        s, t = inner_affine_at(x0)
        og = outer.piece_at(_aff_at((s, t), x0)).lo
        return (og[0] * s, og[0] * t + og[1])

    opens = []
    for k in range(len(bps) + 1):
        lo = bps[k - 1] if k > 0 else None
        hi = bps[k] if k < len(bps) else None
        aff = composed_at_region(lo, hi)
        opens.append(BoundPair(aff, aff))
    points = []
    for b in bps:
        y = _aff_at(inner_affine_at(b), b)
        z = _aff_at(outer.piece_at(y).lo, y)
        points.append(BoundPair((0, z), (0, z)))
    return _canonical_pwa(bps, opens, points)


def _compose_sub(outer, inner):
    if outer is None or isinstance(outer, IdentityMap):
        return inner
    if inner is None or isinstance(inner, IdentityMap):
        return outer
    if isinstance(outer, FiniteEventMap) and isinstance(inner, FiniteEventMap):
        return _compose_finite(outer, inner)
    if isinstance(outer, PiecewiseAffineMap) and isinstance(inner, PiecewiseAffineMap):
        return _compose_pwa(outer, inner)
    if isinstance(outer, ProductEventMap) and isinstance(inner, ProductEventMap):
        if len(outer.dims) != len(inner.dims):
            raise NonComposableError("product map arities differ")
        return ProductEventMap(
            _compose_sub(o, i) for o, i in zip(outer.dims, inner.dims)
        )
    raise NonComposableError(
        f"cannot compose {type(outer).__name__} after {type(inner).__name__}"
    )


def compose(outer: LabelMap, inner: LabelMap) -> LabelMap:
    """The map sending e to the union of outer over inner's image of e."""
    return LabelMap(
        action_map=_compose_sub(outer.action_map, inner.action_map),
        observation_map=_compose_sub(outer.observation_map, inner.observation_map),
    )
