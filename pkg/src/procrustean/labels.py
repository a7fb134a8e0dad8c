"""Symbolic set labels and their algebra.

Edge labels denote sets of events.  Three representations are supported:
finite enumerations of event ids, finite unions of real intervals with
exact rational endpoints, and unions of Cartesian products of sub-labels.
All labels are immutable, canonical values: two labels denote the same
set if and only if they compare equal.
"""

from __future__ import annotations

import itertools
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .errors import (
    EmptyLabelError,
    KindMismatchError,
    VariantMismatchError,
)

ACTION = "action"
OBSERVATION = "observation"
KINDS = (ACTION, OBSERVATION)

# An event value is a finite-space id, a real number, or a tuple of these.
EventValue = Union[str, Fraction, tuple]


def opposite(kind: str) -> str:
    return OBSERVATION if kind == ACTION else ACTION


@dataclass(frozen=True)
class Event:
    """An action or observation identifier together with its kind."""

    id: str
    kind: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("event id must be nonempty")
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Event spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteSpace:
    alphabet: frozenset

    def __init__(self, alphabet: Iterable[str]):
        object.__setattr__(self, "alphabet", frozenset(alphabet))


@dataclass(frozen=True)
class RealSpace:
    pass


@dataclass(frozen=True)
class ProductSpace:
    dims: tuple

    def __init__(self, dims: Iterable):
        object.__setattr__(self, "dims", tuple(dims))

    @property
    def arity(self) -> int:
        return len(self.dims)


Space = Union[FiniteSpace, RealSpace, ProductSpace]


def as_fraction(x) -> Fraction:
    """Coerce a number to an exact rational.

    Floats are read through their shortest decimal repr, so a JSON 10.23
    becomes exactly 1023/100 rather than the nearest binary float.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not event values")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(str(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as a rational number")


# ---------------------------------------------------------------------------
# Label variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteLabel:
    """A finite, kind-homogeneous set of event ids."""

    kind: str
    events: frozenset

    def __init__(self, kind: str, events: Iterable[str]):
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}")
        ids = frozenset(events)
        for e in ids:
            if not isinstance(e, str) or not e:
                raise ValueError(f"finite label events must be nonempty strings, got {e!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "events", ids)


@dataclass(frozen=True)
class IntervalLabel:
    """A finite union of real intervals.

    ``endpoints`` is strictly increasing.  ``interval_flags`` has one more
    entry than ``endpoints`` and marks the open regions between consecutive
    endpoints (the first and last cover the unbounded ends);
    ``endpoint_flags`` marks the endpoints themselves.  The stored form is
    canonical: no endpoint whose removal leaves the set unchanged.
    """

    kind: str
    endpoints: tuple
    interval_flags: tuple
    endpoint_flags: tuple

    def __init__(self, kind, endpoints, interval_flags, endpoint_flags):
        endpoints = tuple(as_fraction(e) for e in endpoints)
        interval_flags = tuple(bool(f) for f in interval_flags)
        endpoint_flags = tuple(bool(f) for f in endpoint_flags)
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}")
        if len(interval_flags) != len(endpoints) + 1:
            raise ValueError("need one interval flag per region")
        if len(endpoint_flags) != len(endpoints):
            raise ValueError("need one endpoint flag per endpoint")
        if any(a >= b for a, b in zip(endpoints, endpoints[1:])):
            raise ValueError("endpoints must be strictly increasing")
        endpoints, interval_flags, endpoint_flags = _canonical_regions(
            endpoints, interval_flags, endpoint_flags
        )
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "endpoints", endpoints)
        object.__setattr__(self, "interval_flags", interval_flags)
        object.__setattr__(self, "endpoint_flags", endpoint_flags)


@dataclass(frozen=True)
class ProductLabel:
    """A union of Cartesian products of sub-labels, one per dimension.

    Stored canonically as a sorted tuple of pairwise-disjoint product
    atoms, so structural equality decides set equality.
    """

    kind: str
    terms: tuple

    def __init__(self, kind, terms):
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}")
        terms = tuple(tuple(t) for t in terms)
        arities = {len(t) for t in terms}
        if len(arities) > 1:
            raise ValueError("all product terms must share one arity")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "terms", _atomize_terms(kind, terms))

    @property
    def arity(self):
        return len(self.terms[0]) if self.terms else None


Label = Union[FiniteLabel, IntervalLabel, ProductLabel]


def _canonical_regions(endpoints, interval_flags, endpoint_flags):
    """Drop endpoints whose point flag equals both neighbouring region flags."""
    new_e, new_p, new_i = [], [], [interval_flags[0]]
    for j, e in enumerate(endpoints):
        if endpoint_flags[j] == new_i[-1] == interval_flags[j + 1]:
            continue
        new_e.append(e)
        new_p.append(endpoint_flags[j])
        new_i.append(interval_flags[j + 1])
    return tuple(new_e), tuple(new_i), tuple(new_p)


# ---------------------------------------------------------------------------
# Construction helpers
# ---------------------------------------------------------------------------


def finite_label(kind: str, *events: str) -> FiniteLabel:
    return FiniteLabel(kind, events)


def empty_interval(kind: str) -> IntervalLabel:
    return IntervalLabel(kind, (), (False,), ())


def full_interval(kind: str) -> IntervalLabel:
    return IntervalLabel(kind, (), (True,), ())


def interval_piece(kind: str, lo, lo_closed: bool, hi, hi_closed: bool) -> IntervalLabel:
    """One interval; ``None`` bounds are unbounded, equal bounds are a point."""
    if lo is None and hi is None:
        return full_interval(kind)
    if lo is None:
        return IntervalLabel(kind, (as_fraction(hi),), (True, False), (bool(hi_closed),))
    if hi is None:
        return IntervalLabel(kind, (as_fraction(lo),), (False, True), (bool(lo_closed),))
    lo, hi = as_fraction(lo), as_fraction(hi)
    if lo > hi:
        raise ValueError(f"interval bounds out of order: {lo} > {hi}")
    if lo == hi:
        if not (lo_closed and hi_closed):
            return empty_interval(kind)
        return point_label(kind, lo)
    return IntervalLabel(kind, (lo, hi), (False, True, False), (bool(lo_closed), bool(hi_closed)))


def point_label(kind: str, x) -> IntervalLabel:
    return IntervalLabel(kind, (as_fraction(x),), (False, False), (True,))


def interval_label(kind: str, pieces: Sequence) -> IntervalLabel:
    """Union of ``(lo, lo_closed, hi, hi_closed)`` pieces."""
    out = empty_interval(kind)
    for lo, lc, hi, hc in pieces:
        out = union(out, interval_piece(kind, lo, lc, hi, hc))
    return out


def product_label(kind: str, terms: Iterable[Sequence[Label]]) -> ProductLabel:
    return ProductLabel(kind, terms)


def empty_label_for(space: Space, kind: str) -> Label:
    if isinstance(space, FiniteSpace):
        return FiniteLabel(kind, ())
    if isinstance(space, RealSpace):
        return empty_interval(kind)
    if isinstance(space, ProductSpace):
        return ProductLabel(kind, ())
    raise TypeError(f"unknown space {space!r}")


# ---------------------------------------------------------------------------
# Interval internals
# ---------------------------------------------------------------------------


def _interval_contains(label: IntervalLabel, x: Fraction) -> bool:
    pts = label.endpoints
    i = bisect_left(pts, x)
    if i < len(pts) and pts[i] == x:
        return label.endpoint_flags[i]
    return label.interval_flags[i]


def _open_region_flag(label: IntervalLabel, probe: Fraction) -> bool:
    """Region membership at a point known not to be a label endpoint."""
    i = bisect_left(label.endpoints, probe)
    return label.interval_flags[i]


def _memberships_on_grid(label: IntervalLabel, grid):
    """Point and gap membership of ``label`` over a grid refining its endpoints."""
    points = [_interval_contains(label, g) for g in grid]
    gaps = []
    for k in range(len(grid) + 1):
        lo = grid[k - 1] if k > 0 else None
        hi = grid[k] if k < len(grid) else None
        if lo is None and hi is None:
            probe = Fraction(0)
        elif lo is None:
            probe = hi - 1
        elif hi is None:
            probe = lo + 1
        else:
            probe = (lo + hi) / 2
        gaps.append(_open_region_flag(label, probe))
    return gaps, points


def _interval_combine(a: IntervalLabel, b: IntervalLabel, op) -> IntervalLabel:
    grid = sorted(set(a.endpoints) | set(b.endpoints))
    ga, pa = _memberships_on_grid(a, grid)
    gb, pb = _memberships_on_grid(b, grid)
    gaps = tuple(op(x, y) for x, y in zip(ga, gb))
    points = tuple(op(x, y) for x, y in zip(pa, pb))
    return IntervalLabel(a.kind, tuple(grid), gaps, points)


def _interval_representative(label: IntervalLabel) -> Fraction:
    pts = label.endpoints
    flagged = [e for e, f in zip(pts, label.endpoint_flags) if f]
    if flagged:
        return flagged[0]
    # Leftmost bounded open region that is in the set.
    for k in range(1, len(pts)):
        if label.interval_flags[k]:
            return (pts[k - 1] + pts[k]) / 2
    if label.interval_flags and label.interval_flags[0] and pts:
        return pts[0] - 1
    if label.interval_flags and label.interval_flags[-1] and pts:
        return pts[-1] + 1
    if label.interval_flags == (True,):
        return Fraction(0)
    raise EmptyLabelError("no representative of an empty label")


# ---------------------------------------------------------------------------
# Product internals
# ---------------------------------------------------------------------------


def _label_sort_key(label: Label):
    if isinstance(label, FiniteLabel):
        return (0, tuple(sorted(label.events)))
    if isinstance(label, IntervalLabel):
        return (
            1,
            tuple((e.numerator, e.denominator) for e in label.endpoints),
            label.interval_flags,
            label.endpoint_flags,
        )
    return (2, tuple(tuple(_label_sort_key(s) for s in t) for t in label.terms))


def _subset(a: Label, b: Label) -> bool:
    return is_empty(difference(a, b))


def _atomize_terms(kind, terms):
    """Rewrite a union of products as sorted, pairwise-disjoint atoms.

    Each dimension is refined across all terms, then every term is expanded
    into products of refinement blocks.  Blocks either lie inside or miss a
    term's sub-label entirely, so the expansion is exact.
    """
    terms = [t for t in terms if not any(is_empty(s) for s in t)]
    if not terms:
        return ()
    arity = len(terms[0])
    blocks_per_dim = []
    for d in range(arity):
        subs = [t[d] for t in terms]
        blocks_per_dim.append(refine_labels(subs))
    atoms = set()
    for t in terms:
        choices = []
        for d in range(arity):
            choices.append(
                [b for b in blocks_per_dim[d] if not is_empty(intersection(b, t[d]))]
            )
        for combo in itertools.product(*choices):
            atoms.add(tuple(combo))
    return tuple(sorted(atoms, key=lambda t: tuple(_label_sort_key(s) for s in t)))


def _product_difference(a: ProductLabel, b: ProductLabel) -> ProductLabel:
    if not a.terms or not b.terms:
        return a
    # Re-atomize both on a common per-dimension grid, then subtract atom sets.
    arity = len(a.terms[0])
    blocks_per_dim = []
    for d in range(arity):
        subs = [t[d] for t in a.terms] + [t[d] for t in b.terms]
        blocks_per_dim.append(refine_labels(subs))

    def expand(terms):
        atoms = set()
        for t in terms:
            choices = [
                [blk for blk in blocks_per_dim[d] if not is_empty(intersection(blk, t[d]))]
                for d in range(arity)
            ]
            atoms.update(itertools.product(*choices))
        return atoms

    kept = expand(a.terms) - expand(b.terms)
    return ProductLabel(a.kind, tuple(kept))


# ---------------------------------------------------------------------------
# The public set-algebra operations
# ---------------------------------------------------------------------------


def _check_pair(a: Label, b: Label):
    if type(a) is not type(b):
        raise VariantMismatchError(
            f"cannot combine {type(a).__name__} with {type(b).__name__}"
        )
    if a.kind != b.kind:
        raise KindMismatchError(f"cannot combine {a.kind} label with {b.kind} label")
    if isinstance(a, ProductLabel):
        if a.terms and b.terms and len(a.terms[0]) != len(b.terms[0]):
            raise VariantMismatchError(
                f"product arities differ: {len(a.terms[0])} vs {len(b.terms[0])}"
            )


def union(a: Label, b: Label) -> Label:
    _check_pair(a, b)
    if isinstance(a, FiniteLabel):
        return FiniteLabel(a.kind, a.events | b.events)
    if isinstance(a, IntervalLabel):
        return _interval_combine(a, b, lambda x, y: x or y)
    return ProductLabel(a.kind, a.terms + b.terms)


def intersection(a: Label, b: Label) -> Label:
    _check_pair(a, b)
    if isinstance(a, FiniteLabel):
        return FiniteLabel(a.kind, a.events & b.events)
    if isinstance(a, IntervalLabel):
        return _interval_combine(a, b, lambda x, y: x and y)
    terms = []
    for s in a.terms:
        for t in b.terms:
            terms.append(tuple(intersection(x, y) for x, y in zip(s, t)))
    return ProductLabel(a.kind, terms)


def difference(a: Label, b: Label) -> Label:
    _check_pair(a, b)
    if isinstance(a, FiniteLabel):
        return FiniteLabel(a.kind, a.events - b.events)
    if isinstance(a, IntervalLabel):
        return _interval_combine(a, b, lambda x, y: x and not y)
    return _product_difference(a, b)


def is_empty(a: Label) -> bool:
    if isinstance(a, FiniteLabel):
        return not a.events
    if isinstance(a, IntervalLabel):
        return not (any(a.interval_flags) or any(a.endpoint_flags))
    return not a.terms


def contains(a: Label, event: EventValue) -> bool:
    if isinstance(a, FiniteLabel):
        if not isinstance(event, str):
            raise TypeError(f"finite labels hold ids, not {event!r}")
        return event in a.events
    if isinstance(a, IntervalLabel):
        return _interval_contains(a, as_fraction(event))
    if not isinstance(event, tuple):
        raise TypeError(f"product labels hold tuples, not {event!r}")
    for term in a.terms:
        if len(term) != len(event):
            raise TypeError(f"expected arity {len(term)}, got {len(event)}")
        if all(contains(sub, x) for sub, x in zip(term, event)):
            return True
    return False


def representative(a: Label) -> EventValue:
    """A deterministic member of the label; leftmost by the documented rule."""
    if is_empty(a):
        raise EmptyLabelError("no representative of an empty label")
    if isinstance(a, FiniteLabel):
        return min(a.events)
    if isinstance(a, IntervalLabel):
        return _interval_representative(a)
    return tuple(representative(sub) for sub in a.terms[0])


def refine_labels(labels: Sequence[Label]) -> list:
    """Split labels into disjoint blocks with constant membership signature.

    The output blocks are pairwise disjoint, cover exactly the union of the
    inputs, and within each block every point belongs to the same subset of
    input labels.  Empty blocks are discarded.
    """
    labels = list(labels)
    if not labels:
        return []
    for other in labels[1:]:
        _check_pair(labels[0], other)
    r = labels[0]
    for lab in labels[1:]:
        r = union(r, lab)
    blocks = [r]
    for lab in labels:
        nxt = []
        for blk in blocks:
            inside = intersection(blk, lab)
            outside = difference(blk, lab)
            if not is_empty(inside):
                nxt.append(inside)
            if not is_empty(outside):
                nxt.append(outside)
        blocks = nxt
    return sorted(blocks, key=_label_sort_key)


def union_all(labels: Sequence[Label], space: Space, kind: str) -> Label:
    out = empty_label_for(space, kind)
    for lab in labels:
        out = union(out, lab)
    return out


# ---------------------------------------------------------------------------
# Space/value compatibility
# ---------------------------------------------------------------------------


def value_fits_space(space: Space, value) -> bool:
    if isinstance(space, FiniteSpace):
        return isinstance(value, str) and value in space.alphabet
    if isinstance(space, RealSpace):
        return isinstance(value, (int, Fraction)) and not isinstance(value, bool)
    if isinstance(space, ProductSpace):
        return (
            isinstance(value, tuple)
            and len(value) == space.arity
            and all(value_fits_space(d, v) for d, v in zip(space.dims, value))
        )
    return False


def label_fits_space(space: Space, label: Label) -> bool:
    if isinstance(space, FiniteSpace):
        return isinstance(label, FiniteLabel) and label.events <= space.alphabet
    if isinstance(space, RealSpace):
        return isinstance(label, IntervalLabel)
    if isinstance(space, ProductSpace):
        if not isinstance(label, ProductLabel):
            return False
        return all(
            len(term) == space.arity
            and all(label_fits_space(d, sub) for d, sub in zip(space.dims, term))
            for term in label.terms
        )
    return False


def singleton_event(label: Label):
    """The single event of a one-element label, or None."""
    if isinstance(label, FiniteLabel):
        if len(label.events) == 1:
            return next(iter(label.events))
        return None
    if isinstance(label, IntervalLabel):
        if (
            not any(label.interval_flags)
            and sum(label.endpoint_flags) == 1
        ):
            return label.endpoints[label.endpoint_flags.index(True)]
        return None
    if isinstance(label, ProductLabel):
        if len(label.terms) != 1:
            return None
        parts = [singleton_event(sub) for sub in label.terms[0]]
        if any(p is None for p in parts):
            return None
        return tuple(parts)
    return None


def enumerate_events(label: Label):
    """List the events of a finitely enumerable label, or None."""
    if isinstance(label, FiniteLabel):
        return sorted(label.events)
    if isinstance(label, IntervalLabel):
        if any(label.interval_flags):
            return None
        return [e for e, f in zip(label.endpoints, label.endpoint_flags) if f]
    if isinstance(label, ProductLabel):
        out = []
        for term in label.terms:
            per_dim = [enumerate_events(sub) for sub in term]
            if any(p is None for p in per_dim):
                return None
            out.extend(itertools.product(*per_dim))
        return sorted(set(out))
    return None


def format_label(label: Label) -> str:
    """Compact human-readable rendering, used by the CLI and DOT export."""
    if isinstance(label, FiniteLabel):
        return "{" + ",".join(sorted(label.events)) + "}"
    if isinstance(label, IntervalLabel):
        if is_empty(label):
            return "(empty)"
        parts = []
        pts = label.endpoints
        n = len(pts)
        k = 0
        while k <= 2 * n:
            if k % 2 == 0:  # region
                i = k // 2
                if label.interval_flags[i]:
                    lo = pts[i - 1] if i > 0 else None
                    hi = pts[i] if i < n else None
                    lo_in = i > 0 and label.endpoint_flags[i - 1]
                    hi_in = i < n and label.endpoint_flags[i]
                    # Extend over flagged endpoints to render maximal pieces.
                    parts.append(_fmt_piece(lo, lo_in, hi, hi_in))
            else:  # endpoint
                j = k // 2
                if label.endpoint_flags[j] and not (
                    label.interval_flags[j] or label.interval_flags[j + 1]
                ):
                    parts.append("{%s}" % _fmt_num(pts[j]))
            k += 1
        return " u ".join(_merge_adjacent_pieces(parts))
    return " u ".join(
        "(" + " x ".join(format_label(sub) for sub in term) + ")" for term in label.terms
    )


def _fmt_num(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _fmt_piece(lo, lo_in, hi, hi_in) -> str:
    left = "[" if lo_in else "("
    right = "]" if hi_in else ")"
    lo_s = _fmt_num(lo) if lo is not None else "-inf"
    hi_s = _fmt_num(hi) if hi is not None else "inf"
    return f"{left}{lo_s},{hi_s}{right}"


def _merge_adjacent_pieces(parts):
    # Rendering only; canonical structure already merged what can merge.
    return parts
