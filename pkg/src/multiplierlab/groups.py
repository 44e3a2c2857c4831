"""Discrete groups, finite element sets and left-regular matrices.

Two kinds of group are supported:

* :class:`FiniteGroup` -- a validated Cayley table; elements are the row
  indices ``0 .. order-1``.
* :class:`LatticeGroup` (``Z^d``, elements are integer tuples) and
  :class:`FreeGroup` (``F_k``, elements are reduced words stored as tuples of
  nonzero ints, ``+i`` for the i-th generator and ``-i`` for its inverse).

All objects are immutable once built.
"""

from __future__ import annotations

import csv
import itertools
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

MAX_TABLE_ORDER = 512
MAX_SET_SIZE = 4096

Element = Hashable


class GroupError(ValueError):
    """Raised for malformed group data or unknown group specs."""


class FiniteGroup:
    """A finite group given by its Cayley table.

    ``cayley[g, h]`` is the index of the product ``g*h``.
    """

    is_finite = True

    def __init__(self, cayley: Any, name: str | None = None, labels: Sequence[str] | None = None):
        table = np.asarray(cayley)
        if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] == 0:
            raise GroupError(f"Cayley table must be a non-empty square array, got shape {table.shape}")
        n = table.shape[0]
        if n > MAX_TABLE_ORDER:
            raise GroupError(f"order {n} exceeds the cap of {MAX_TABLE_ORDER}")
        if not np.issubdtype(table.dtype, np.integer):
            if not np.all(np.equal(np.mod(table, 1), 0)):
                raise GroupError("Cayley table entries must be integers")
        table = table.astype(np.int64)
        if table.min() < 0 or table.max() >= n:
            bad = np.argwhere((table < 0) | (table >= n))[0]
            raise GroupError(f"entry at row {bad[0]}, column {bad[1]} is outside 0..{n - 1}")
        _check_latin(table)
        identity = _find_identity(table)
        _check_associative(table)
        inverse = np.argmax(table == identity, axis=1)
        table.setflags(write=False)
        inverse.setflags(write=False)
        self.cayley = table
        self.order = n
        self.identity = identity
        self.inverse = inverse
        self.name = name or f"table:{n}"
        self.labels = tuple(labels) if labels is not None else None

    def __repr__(self) -> str:
        return f"FiniteGroup({self.name}, order={self.order})"

    def elements(self) -> list[int]:
        return list(range(self.order))

    def mul(self, g: int, h: int) -> int:
        return int(self.cayley[g, h])

    def inv(self, g: int) -> int:
        return int(self.inverse[g])

    def contains(self, g: Any) -> bool:
        return isinstance(g, (int, np.integer)) and 0 <= int(g) < self.order

    def parse(self, text: str | int) -> int:
        if isinstance(text, (int, np.integer)):
            g = int(text)
        else:
            text = str(text).strip()
            if self.labels is not None and text in self.labels:
                return self.labels.index(text)
            try:
                g = int(text)
            except ValueError as exc:
                raise GroupError(f"cannot parse element {text!r} of {self.name}") from exc
        if not self.contains(g):
            raise GroupError(f"element {g} is not in {self.name} (order {self.order})")
        return g

    def format(self, g: int) -> str:
        return str(int(g))

    def is_abelian(self) -> bool:
        return bool(np.array_equal(self.cayley, self.cayley.T))

    def quotient_index(self) -> np.ndarray:
        """Table ``D[s, t]`` = index of ``s t^-1``."""
        return self.cayley[:, self.inverse]


def _check_latin(table: np.ndarray) -> None:
    n = table.shape[0]
    full = np.arange(n)
    for i in range(n):
        if not np.array_equal(np.sort(table[i]), full):
            vals, counts = np.unique(table[i], return_counts=True)
            dup = int(vals[counts > 1][0])
            raise GroupError(f"row {i} is not a permutation (value {dup} repeats): not a Latin square")
    for j in range(n):
        if not np.array_equal(np.sort(table[:, j]), full):
            vals, counts = np.unique(table[:, j], return_counts=True)
            dup = int(vals[counts > 1][0])
            raise GroupError(f"column {j} is not a permutation (value {dup} repeats): not a Latin square")


def _find_identity(table: np.ndarray) -> int:
    n = table.shape[0]
    full = np.arange(n)
    for e in range(n):
        if np.array_equal(table[e], full) and np.array_equal(table[:, e], full):
            return e
    raise GroupError("no two-sided identity element in the Cayley table")


def _check_associative(table: np.ndarray) -> None:
    for a in range(table.shape[0]):
        left = table[table[a]]  # (ab)c
        right = table[a][table]  # a(bc)
        if not np.array_equal(left, right):
            b, c = np.argwhere(left != right)[0]
            raise GroupError(f"associativity fails for the triple ({a}, {b}, {c})")


def build_finite_group(cayley: Any, name: str | None = None) -> FiniteGroup:
    """Validate a Cayley table and return the group it defines."""
    return FiniteGroup(cayley, name=name)


def read_cayley_csv(path: str | Path) -> FiniteGroup:
    """Load a Cayley table from a CSV file of zero-based indices."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells:
                continue
            try:
                rows.append([int(c) for c in cells])
            except ValueError as exc:
                raise GroupError(f"{path}:{lineno}: non-integer entry in Cayley table") from exc
            if len(rows[-1]) != len(rows[0]):
                raise GroupError(f"{path}:{lineno}: row has {len(rows[-1])} entries, expected {len(rows[0])}")
    if not rows:
        raise GroupError(f"{path}: empty Cayley table")
    return FiniteGroup(np.array(rows), name=f"csv:{path}")


def write_cayley_csv(group: FiniteGroup, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(group.cayley.tolist())


class LatticeGroup:
    """The free abelian group Z^d with elements stored as integer tuples."""

    is_finite = False
    order = None

    def __init__(self, d: int):
        if d < 1:
            raise GroupError("lattice dimension must be positive")
        self.d = d
        self.identity = (0,) * d
        self.name = f"zd:{d}"

    def __repr__(self) -> str:
        return f"LatticeGroup(d={self.d})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LatticeGroup) and other.d == self.d

    def __hash__(self) -> int:
        return hash(("zd", self.d))

    def mul(self, g: tuple, h: tuple) -> tuple:
        return tuple(a + b for a, b in zip(g, h))

    def inv(self, g: tuple) -> tuple:
        return tuple(-a for a in g)

    def contains(self, g: Any) -> bool:
        return isinstance(g, tuple) and len(g) == self.d and all(isinstance(a, (int, np.integer)) for a in g)

    def generators(self) -> list[tuple]:
        gens = []
        for i in range(self.d):
            e = [0] * self.d
            e[i] = 1
            gens.append(tuple(e))
            e[i] = -1
            gens.append(tuple(e))
        return gens

    def parse(self, text: Any) -> tuple:
        if isinstance(text, (list, tuple)):
            vals = list(text)
        elif isinstance(text, (int, np.integer)):
            vals = [int(text)]
        else:
            s = str(text).strip().strip("()[]")
            try:
                vals = [int(v) for v in s.split(",") if v.strip() != ""]
            except ValueError as exc:
                raise GroupError(f"cannot parse lattice element {text!r}") from exc
        if len(vals) != self.d:
            raise GroupError(f"lattice element {text!r} must have {self.d} coordinates")
        return tuple(int(v) for v in vals)

    def format(self, g: tuple) -> str:
        return ",".join(str(a) for a in g)

    def word_length(self, g: tuple) -> int:
        return sum(abs(a) for a in g)


class FreeGroup:
    """Free group on k generators; elements are reduced words.

    Text form uses lowercase letters for generators and uppercase for their
    inverses, so ``"aB"`` is ``a * b^-1`` and ``""`` (or ``"e"``) is the
    identity.
    """

    is_finite = False
    order = None

    def __init__(self, k: int):
        if not 1 <= k <= 26:
            raise GroupError("free group rank must be between 1 and 26")
        self.k = k
        self.identity: tuple = ()
        self.name = f"free:{k}"

    def __repr__(self) -> str:
        return f"FreeGroup(k={self.k})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FreeGroup) and other.k == self.k

    def __hash__(self) -> int:
        return hash(("free", self.k))

    @staticmethod
    def reduce(word: Iterable[int]) -> tuple:
        out: list[int] = []
        for letter in word:
            if out and out[-1] == -letter:
                out.pop()
            else:
                out.append(letter)
        return tuple(out)

    def mul(self, g: tuple, h: tuple) -> tuple:
        i = 0
        while i < len(g) and i < len(h) and g[-1 - i] == -h[i]:
            i += 1
        return g[: len(g) - i] + h[i:]

    def inv(self, g: tuple) -> tuple:
        return tuple(-a for a in reversed(g))

    def contains(self, g: Any) -> bool:
        if not isinstance(g, tuple):
            return False
        if any(not isinstance(a, (int, np.integer)) or a == 0 or abs(a) > self.k for a in g):
            return False
        return all(g[i] != -g[i + 1] for i in range(len(g) - 1))

    def generators(self) -> list[tuple]:
        gens = []
        for i in range(1, self.k + 1):
            gens.append((i,))
            gens.append((-i,))
        return gens

    def parse(self, text: Any) -> tuple:
        if isinstance(text, tuple):
            if not self.contains(text):
                raise GroupError(f"{text!r} is not a reduced word of {self.name}")
            return text
        s = str(text).strip()
        if s in ("", "e", "1"):
            return ()
        letters = []
        for ch in s:
            if not ch.isalpha():
                raise GroupError(f"invalid letter {ch!r} in word {s!r}")
            idx = ord(ch.lower()) - ord("a") + 1
            if idx > self.k:
                raise GroupError(f"letter {ch!r} is not a generator of {self.name}")
            letters.append(idx if ch.islower() else -idx)
        return self.reduce(letters)

    def format(self, g: tuple) -> str:
        if not g:
            return "e"
        return "".join(chr(ord("a") + a - 1) if a > 0 else chr(ord("A") - a - 1) for a in g)

    def word_length(self, g: tuple) -> int:
        return len(g)


GeneratedGroup = LatticeGroup | FreeGroup
Group = FiniteGroup | LatticeGroup | FreeGroup


# ---------------------------------------------------------------------------
# builtin finite groups


def _table_from_elements(elements: Sequence, mul, name: str, labels=None) -> FiniteGroup:
    index = {e: i for i, e in enumerate(elements)}
    n = len(elements)
    if n > MAX_TABLE_ORDER:
        raise GroupError(f"{name} has order {n}, above the cap of {MAX_TABLE_ORDER}")
    table = np.empty((n, n), dtype=np.int64)
    for i, a in enumerate(elements):
        for j, b in enumerate(elements):
            table[i, j] = index[mul(a, b)]
    return FiniteGroup(table, name=name, labels=labels)


def cyclic_group(n: int) -> FiniteGroup:
    if n < 1:
        raise GroupError("zmod order must be positive")
    if n > MAX_TABLE_ORDER:
        raise GroupError(f"zmod:{n} exceeds the order cap of {MAX_TABLE_ORDER}")
    r = np.arange(n)
    return FiniteGroup((r[:, None] + r[None, :]) % n, name=f"zmod:{n}")


def dihedral_group(n: int) -> FiniteGroup:
    """Symmetries of the n-gon, order 2n; index ``i + n*j`` is ``r^i s^j``."""
    if n < 1:
        raise GroupError("dihedral parameter must be positive")
    elements = [(i, j) for j in range(2) for i in range(n)]

    def mul(a, b):
        return ((a[0] + (-1) ** a[1] * b[0]) % n, (a[1] + b[1]) % 2)

    return _table_from_elements(elements, mul, f"dihedral:{n}")


def symmetric_group(n: int) -> FiniteGroup:
    """Permutations of n points in lexicographic order; ``(s*t)(i) = s(t(i))``."""
    if n < 1:
        raise GroupError("sym parameter must be positive")
    if n > 5:
        raise GroupError(f"sym:{n} exceeds the order cap of {MAX_TABLE_ORDER}")
    elements = list(itertools.permutations(range(n)))
    return _table_from_elements(elements, lambda s, t: tuple(s[i] for i in t), f"sym:{n}")


def _parity(perm: Sequence[int]) -> int:
    inversions = sum(1 for i, j in itertools.combinations(range(len(perm)), 2) if perm[i] > perm[j])
    return inversions % 2


def alternating_group(n: int) -> FiniteGroup:
    if n < 1:
        raise GroupError("alt parameter must be positive")
    if n > 6:
        raise GroupError(f"alt:{n} exceeds the order cap of {MAX_TABLE_ORDER}")
    elements = [p for p in itertools.permutations(range(n)) if _parity(p) == 0]
    return _table_from_elements(elements, lambda s, t: tuple(s[i] for i in t), f"alt:{n}")


def dicyclic_group(n: int) -> FiniteGroup:
    """Dicyclic group of order 4n (``dicyclic:2`` is the quaternion group)."""
    if n < 1:
        raise GroupError("dicyclic parameter must be positive")
    m = 2 * n
    elements = [(i, j) for j in range(2) for i in range(m)]

    def mul(a, b):
        i, j = a
        k, l = b
        if j == 0:
            return ((i + k) % m, l)
        if l == 0:
            return ((i - k) % m, 1)
        return ((i - k + n) % m, 0)

    return _table_from_elements(elements, mul, f"dicyclic:{n}")


def metacyclic_group(m: int, n: int, r: int) -> FiniteGroup:
    """Semidirect product Z/m x| Z/n where the generator of Z/n acts by ``a -> r*a``."""
    if m < 1 or n < 1:
        raise GroupError("metacyclic parameters must be positive")
    if pow(r, n, m) != 1 % m:
        raise GroupError(f"metacyclic:{m},{n},{r} needs r^n = 1 mod m")
    elements = [(a, b) for b in range(n) for a in range(m)]

    def mul(x, y):
        return ((x[0] + pow(r, x[1], m) * y[0]) % m, (x[1] + y[1]) % n)

    return _table_from_elements(elements, mul, f"metacyclic:{m},{n},{r}")


def sl2_group(p: int) -> FiniteGroup:
    """SL(2, p) for a small prime p."""
    if p < 2 or any(p % d == 0 for d in range(2, p)):
        raise GroupError("sl2 needs a prime modulus")
    elements = [
        (a, b, c, d)
        for a, b, c, d in itertools.product(range(p), repeat=4)
        if (a * d - b * c) % p == 1
    ]

    def mul(x, y):
        a, b, c, d = x
        e, f, g, h = y
        return ((a * e + b * g) % p, (a * f + b * h) % p, (c * e + d * g) % p, (c * f + d * h) % p)

    return _table_from_elements(elements, mul, f"sl2:{p}")


def direct_product(g: FiniteGroup, h: FiniteGroup) -> FiniteGroup:
    """Direct product; index ``i * |h| + j`` is the pair ``(i, j)``."""
    n = g.order * h.order
    if n > MAX_TABLE_ORDER:
        raise GroupError(f"product order {n} exceeds the cap of {MAX_TABLE_ORDER}")
    table = (g.cayley[:, None, :, None] * h.order + h.cayley[None, :, None, :]).reshape(n, n)
    return FiniteGroup(table, name=f"{g.name}*{h.name}")


def _int_args(arg: str, tag: str, count: int) -> list[int]:
    try:
        vals = [int(v) for v in arg.split(",")]
    except ValueError as exc:
        raise GroupError(f"bad parameters {arg!r} for {tag}") from exc
    if len(vals) != count:
        raise GroupError(f"{tag} takes {count} integer parameter(s)")
    return vals


_FINITE_BUILDERS = {
    "zmod": (1, cyclic_group),
    "dihedral": (1, dihedral_group),
    "sym": (1, symmetric_group),
    "alt": (1, alternating_group),
    "dicyclic": (1, dicyclic_group),
    "metacyclic": (3, metacyclic_group),
    "sl2": (1, sl2_group),
}


def builtin_group(spec: str) -> Group:
    """Build a group from a tagged spec such as ``zmod:4``, ``sym:3``, ``zd:2``, ``free:2``.

    Finite specs may be joined with ``*`` to form direct products, and
    ``csv:PATH`` loads a Cayley table file.
    """
    spec = spec.strip()
    if spec.startswith("csv:"):
        return read_cayley_csv(spec[4:])
    if "*" in spec:
        parts = [builtin_group(s) for s in spec.split("*")]
        if not all(isinstance(p, FiniteGroup) for p in parts):
            raise GroupError("direct products are only supported for finite groups")
        out = parts[0]
        for p in parts[1:]:
            out = direct_product(out, p)
        return out
    tag, _, arg = spec.partition(":")
    if tag == "zd":
        (d,) = _int_args(arg, tag, 1)
        return LatticeGroup(d)
    if tag == "free":
        (k,) = _int_args(arg, tag, 1)
        return FreeGroup(k)
    if tag not in _FINITE_BUILDERS:
        raise GroupError(f"unknown group spec tag {tag!r}")
    count, builder = _FINITE_BUILDERS[tag]
    return builder(*_int_args(arg, tag, count))


# Non-cyclic groups of order <= 24 reachable from the builders; every order
# also gets its cyclic group.  Orders 16, 18 and 24 are not exhaustive.
_NONCYCLIC_SMALL = (
    "zmod:2*zmod:2", "dihedral:3",
    "zmod:2*zmod:4", "zmod:2*zmod:2*zmod:2", "dihedral:4", "dicyclic:2",
    "zmod:3*zmod:3", "dihedral:5",
    "zmod:2*zmod:6", "dihedral:6", "alt:4", "dicyclic:3",
    "dihedral:7",
    "zmod:4*zmod:4", "zmod:2*zmod:8", "zmod:2*zmod:2*zmod:4", "zmod:2*zmod:2*zmod:2*zmod:2",
    "dihedral:8", "dicyclic:4", "dihedral:4*zmod:2", "dicyclic:2*zmod:2",
    "metacyclic:8,2,5", "metacyclic:8,2,3", "metacyclic:4,4,3",
    "zmod:3*zmod:6", "dihedral:9", "sym:3*zmod:3",
    "zmod:2*zmod:10", "dihedral:10", "dicyclic:5", "metacyclic:5,4,2",
    "metacyclic:7,3,2",
    "dihedral:11",
    "zmod:2*zmod:12", "zmod:2*zmod:2*zmod:6", "sym:4", "sl2:3", "dihedral:12", "dicyclic:6",
    "alt:4*zmod:2", "dihedral:4*zmod:3", "dicyclic:2*zmod:3", "sym:3*zmod:4",
    "dicyclic:3*zmod:2", "dihedral:6*zmod:2", "metacyclic:3,8,2",
)


def small_group_specs(max_order: int = 24) -> list[str]:
    """Specs for a catalog of finite groups of order at most ``max_order``, by order."""
    specs = [f"zmod:{n}" for n in range(1, max_order + 1)]
    specs += [s for s in _NONCYCLIC_SMALL if builtin_group(s).order <= max_order]
    return sorted(specs, key=lambda s: builtin_group(s).order)


# ---------------------------------------------------------------------------
# element sets


@dataclass(frozen=True)
class ElementSet:
    """An ordered finite subset F of a group; the order indexes matrix rows and columns."""

    group: Any
    elements: tuple
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = {}
        for i, g in enumerate(self.elements):
            if g in idx:
                raise GroupError(f"duplicate element {g!r} in element set")
            idx[g] = i
        object.__setattr__(self, "index", idx)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, g) -> bool:
        return g in self.index

    def position(self, g) -> int | None:
        return self.index.get(g)

    def translate(self, g) -> "ElementSet":
        """The left translate gF, in the order inherited from F."""
        return ElementSet(self.group, tuple(self.group.mul(g, f) for f in self.elements))


def element_set(group: Group, elements: Iterable, cap: int = MAX_SET_SIZE) -> ElementSet:
    elems = tuple(elements)
    if len(elems) > cap:
        raise GroupError(f"element set of size {len(elems)} exceeds the cap of {cap}")
    for g in elems:
        if not group.contains(g):
            raise GroupError(f"{g!r} is not an element of {group.name}")
    return ElementSet(group, elems)


def word_ball(group: LatticeGroup | FreeGroup, radius: int, cap: int = MAX_SET_SIZE) -> ElementSet:
    """Word-metric ball of the given radius in BFS order."""
    if radius < 0:
        raise GroupError("radius must be nonnegative")
    seen = {group.identity: 0}
    order = [group.identity]
    queue = deque([group.identity])
    gens = group.generators()
    while queue:
        g = queue.popleft()
        if seen[g] == radius:
            continue
        for s in gens:
            h = group.mul(g, s)
            if h not in seen:
                seen[h] = seen[g] + 1
                order.append(h)
                if len(order) > cap:
                    raise GroupError(f"ball of radius {radius} exceeds the set cap of {cap}")
                queue.append(h)
    return ElementSet(group, tuple(order))


def folner_set(group: Group, radius: int, cap: int = MAX_SET_SIZE) -> ElementSet:
    """The radius-th set of the canonical sequence for ``group``.

    Z^d: the box ``[0, radius)^d`` in lexicographic order.  Finite groups: the
    whole group.  Free groups: the word ball (not a Folner sequence; used for
    contrast).
    """
    if radius < 0:
        raise GroupError("radius must be nonnegative")
    if isinstance(group, FiniteGroup):
        if group.order > cap:
            raise GroupError(f"group order {group.order} exceeds the set cap of {cap}")
        return ElementSet(group, tuple(range(group.order)))
    if isinstance(group, LatticeGroup):
        if radius**group.d > cap:
            raise GroupError(f"box of side {radius} in Z^{group.d} exceeds the set cap of {cap}")
        return ElementSet(group, tuple(itertools.product(range(radius), repeat=group.d)))
    if isinstance(group, FreeGroup):
        return word_ball(group, radius, cap)
    raise GroupError(f"unsupported group {group!r}")


def folner_defect(F: ElementSet, g) -> float:
    """``|F & gF| / |F|``; 1 means F is invariant under g."""
    if len(F) == 0:
        raise GroupError("folner_defect needs a nonempty set")
    mul = F.group.mul
    hits = sum(1 for f in F.elements if mul(g, f) in F.index)
    return hits / len(F)


def lambda_matrix(g, F: ElementSet) -> np.ndarray:
    """0/1 matrix with entry (s, t) equal to 1 iff ``s t^-1 == g``, for s, t in F."""
    n = len(F)
    out = np.zeros((n, n))
    mul = F.group.mul
    for j, t in enumerate(F.elements):
        i = F.index.get(mul(g, t))
        if i is not None:
            out[i, j] = 1.0
    return out
