"""Finite multisets over string symbols.

A multiset is an immutable mapping ``symbol -> positive count``.  The text
form is a whitespace separated token list with an optional ``^k`` suffix,
e.g. ``"A^2 B E^2"``; ``λ`` (or the empty string) is the empty multiset.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping

EMPTY_TOKEN = "λ"
_FORBIDDEN = re.compile(r"\s|->|\^|@")


class MultisetError(ValueError):
    """Raised on malformed symbols, bad text or an undefined difference."""


def check_symbol(name: str) -> str:
    if not isinstance(name, str) or not name or _FORBIDDEN.search(name) or name == EMPTY_TOKEN:
        raise MultisetError(f"invalid symbol {name!r}")
    return name


class Multiset(Mapping):
    """Immutable finite multiset.

    Behaves as a read-only mapping whose missing keys count as zero.  Equality
    and hashing ignore insertion order.
    """

    __slots__ = ("_counts", "_hash", "_key")

    def __init__(self, items: Mapping[str, int] | Iterable[str] | None = None):
        counts: dict[str, int] = {}
        if items is None:
            pass
        elif isinstance(items, Mapping):
            for sym, n in items.items():
                if not isinstance(n, int) or n < 0:
                    raise MultisetError(f"count for {sym!r} must be a nonnegative int, got {n!r}")
                if n:
                    counts[check_symbol(sym)] = n
        else:
            for sym in items:
                check_symbol(sym)
                counts[sym] = counts.get(sym, 0) + 1
        self._counts = counts
        self._hash = None
        self._key = None

    @classmethod
    def _raw(cls, counts: dict[str, int]) -> "Multiset":
        # trusted constructor: counts already validated and positive
        m = cls.__new__(cls)
        m._counts = counts
        m._hash = None
        m._key = None
        return m

    @classmethod
    def parse(cls, text: str) -> "Multiset":
        counts: dict[str, int] = {}
        for tok in text.split():
            if tok == EMPTY_TOKEN:
                continue
            if "^" in tok:
                sym, _, k = tok.partition("^")
                if not k.isdigit() or int(k) < 1:
                    raise MultisetError(f"bad multiplicity in token {tok!r}")
                n = int(k)
            else:
                sym, n = tok, 1
            check_symbol(sym)
            counts[sym] = counts.get(sym, 0) + n
        return cls._raw(counts)

    # Mapping protocol
    def __getitem__(self, sym: str) -> int:
        return self._counts.get(sym, 0)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._counts))

    def __len__(self) -> int:
        """Number of distinct symbols (use :attr:`size` for the multiset size)."""
        return len(self._counts)

    def __contains__(self, sym: object) -> bool:
        return sym in self._counts

    @property
    def size(self) -> int:
        return sum(self._counts.values())

    def support(self) -> frozenset[str]:
        return frozenset(self._counts)

    def items(self):
        return sorted(self._counts.items())

    def elements(self) -> Iterator[str]:
        for sym, n in self.items():
            for _ in range(n):
                yield sym

    def key(self) -> tuple[tuple[str, int], ...]:
        """Canonical sorted tuple; cheap identity for dict keys and ordering."""
        if self._key is None:
            self._key = tuple(sorted(self._counts.items()))
        return self._key

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Multiset):
            return self._counts == other._counts
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._counts.items()))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self._counts)

    # algebra
    def __add__(self, other: "Multiset") -> "Multiset":
        if not other._counts:
            return self
        counts = dict(self._counts)
        for sym, n in other._counts.items():
            counts[sym] = counts.get(sym, 0) + n
        return Multiset._raw(counts)

    def __sub__(self, other: "Multiset") -> "Multiset":
        counts = dict(self._counts)
        for sym, n in sorted(other._counts.items()):
            have = counts.get(sym, 0)
            if have < n:
                raise MultisetError(
                    f"difference undefined: {sym} occurs {n} times in subtrahend, {have} in minuend"
                )
            if have == n:
                del counts[sym]
            else:
                counts[sym] = have - n
        return Multiset._raw(counts)

    def __le__(self, other: "Multiset") -> bool:
        oc = other._counts
        return all(oc.get(sym, 0) >= n for sym, n in self._counts.items())

    def __ge__(self, other: "Multiset") -> bool:
        return other <= self

    def times(self, k: int) -> "Multiset":
        if k < 0:
            raise MultisetError("negative scalar")
        if k == 0:
            return EMPTY
        return Multiset._raw({s: n * k for s, n in self._counts.items()})

    def project(self, keep: Iterable[str]) -> "Multiset":
        keep = keep if isinstance(keep, (set, frozenset)) else set(keep)
        return Multiset._raw({s: n for s, n in self._counts.items() if s in keep})

    def without(self, drop: Iterable[str]) -> "Multiset":
        drop = drop if isinstance(drop, (set, frozenset)) else set(drop)
        return Multiset._raw({s: n for s, n in self._counts.items() if s not in drop})

    def max_copies(self, sub: "Multiset") -> int:
        """Largest k with ``sub.times(k) <= self``; ``sub`` must be non-empty."""
        return min(self._counts.get(s, 0) // n for s, n in sub._counts.items())

    def render(self) -> str:
        if not self._counts:
            return EMPTY_TOKEN
        return " ".join(s if n == 1 else f"{s}^{n}" for s, n in self.items())

    def __str__(self) -> str:
        return self.render()

    def __repr__(self) -> str:
        return f"Multiset({self.render()!r})"


EMPTY = Multiset()


def ms(text: str) -> Multiset:
    """Shorthand for :meth:`Multiset.parse`."""
    return Multiset.parse(text)


def msum(xs: Iterable[Multiset]) -> Multiset:
    counts: dict[str, int] = {}
    for x in xs:
        for sym, n in x._counts.items():
            counts[sym] = counts.get(sym, 0) + n
    return Multiset._raw(counts)


def is_submultiset(x: Multiset, y: Multiset) -> bool:
    return x <= y


def project(m: Multiset, keep: Iterable[str]) -> Multiset:
    return m.project(keep)
