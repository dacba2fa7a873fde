"""Polymorphism patterns, partial operations, and preservation checking.

A polymorphism pattern is a set of rows (t, x) where t is a tuple of
variable symbols and x occurs in t; instantiating all rows over a concrete
domain yields a unique partial operation.  Over the Boolean domain these
are exactly the self-dual idempotent partial operations, and the canonical
families (k-NU, k-edge, k-universal) organise into levels: the level of an
operation with |domain| = 2k+2 is k, k-NU is the strongest operation on
its level and k-universal the weakest.

Preservation checks enumerate column-type assignments: a violation of
preserves(p, R) is a choice of one domain element of p per position of R
whose rows all lie in R while the resulting row does not.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional, Sequence

import numpy as np

from .relations import (
    DomainTuple,
    Relation,
    decode_tuple,
    encode_tuple,
)

PRESERVES_GUARD_BITS = 30
_MATERIALIZE_CAP = 1 << 18
_CHUNK = 1 << 16


class FeasibilityError(ValueError):
    """Raised when an exhaustive enumeration would exceed the guard bounds."""


@dataclass(frozen=True)
class PolymorphismPattern:
    """Rows (variable tuple, result variable) over symbols such as {x, y}."""

    arity: int
    rows: tuple[tuple[tuple[str, ...], str], ...]

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError("pattern arity must be positive")
        if not self.rows:
            raise ValueError("pattern must have at least one row")
        for syms, res in self.rows:
            if len(syms) != self.arity:
                raise ValueError(f"row {syms} does not match arity {self.arity}")
            if res not in syms:
                raise ValueError(f"result variable {res!r} does not occur in {syms}")


def parse_pattern(text: str) -> PolymorphismPattern:
    """Parse a pattern literal such as 'xxy>y;xyx>y'."""
    rows = []
    for part in text.split(";"):
        part = part.strip()
        if ">" not in part:
            raise ValueError(f"pattern row {part!r} lacks a '>' result marker")
        left, res = part.split(">", 1)
        rows.append((tuple(left.strip()), res.strip()))
    arity = len(rows[0][0])
    return PolymorphismPattern(arity, tuple(rows))


def format_pattern(pattern: PolymorphismPattern) -> str:
    return ";".join("".join(syms) + ">" + res for syms, res in pattern.rows)


class PartialOp:
    """A partial operation over {0..d-1}, defined on an explicit table."""

    def __init__(
        self,
        domain_size: int,
        arity: int,
        table: dict[DomainTuple, int],
        name: str = "",
    ) -> None:
        if domain_size < 2:
            raise ValueError("domain size must be >= 2")
        for args, value in table.items():
            if len(args) != arity:
                raise ValueError(f"table key {args} does not match arity {arity}")
            if any(not 0 <= v < domain_size for v in args) or not 0 <= value < domain_size:
                raise ValueError("table entry out of domain range")
        self.domain_size = domain_size
        self.arity = arity
        self.table = dict(table)
        self.name = name
        codes = sorted(encode_tuple(domain_size, t) for t in table)
        self._codes = tuple(codes)
        self._by_code = {
            encode_tuple(domain_size, t): v for t, v in table.items()
        }
        self._key = (
            domain_size,
            arity,
            tuple((c, self._by_code[c]) for c in codes),
        )

    @property
    def key(self) -> tuple:
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PartialOp) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        label = self.name or "op"
        return f"PartialOp({label}, d={self.domain_size}, arity={self.arity}, |domain|={len(self.table)})"

    def domain_codes(self) -> tuple[int, ...]:
        return self._codes

    def domain_tuples(self) -> list[DomainTuple]:
        return [decode_tuple(self.domain_size, self.arity, c) for c in self._codes]

    def defined_on(self, values: Sequence[int]) -> bool:
        return tuple(values) in self.table

    def __call__(self, values: Sequence[int]) -> int:
        return self.table[tuple(values)]

    def value_at_code(self, code: int) -> int:
        return self._by_code[code]

    def is_idempotent(self) -> bool:
        return all(
            self.table.get((v,) * self.arity) == v for v in range(self.domain_size)
        )

    def is_self_dual(self) -> bool:
        if self.domain_size != 2:
            raise ValueError("self-duality is a Boolean notion")
        for args, value in self.table.items():
            comp = tuple(1 - a for a in args)
            if self.table.get(comp) != 1 - value:
                return False
        return True

    def is_psdi(self) -> bool:
        return self.domain_size == 2 and self.is_idempotent() and self.is_self_dual()

    def zero_rows(self) -> list[DomainTuple]:
        """Non-constant domain tuples mapped to 0, ascending by code (Boolean)."""
        out = [
            decode_tuple(2, self.arity, c)
            for c in self._codes
            if self._by_code[c] == 0 and c != 0
        ]
        return out


def instantiate_pattern(
    pattern: PolymorphismPattern, domain_size: int, name: str = ""
) -> PartialOp:
    """The unique partial operation satisfying the pattern over the domain."""
    table: dict[DomainTuple, int] = {}
    for syms, res in pattern.rows:
        variables = sorted(set(syms))
        for values in itertools.product(range(domain_size), repeat=len(variables)):
            tau = dict(zip(variables, values))
            key = tuple(tau[s] for s in syms)
            val = tau[res]
            if key in table and table[key] != val:
                raise ValueError(
                    f"inconsistent pattern: {key} forced to both {table[key]} and {val}"
                )
            table[key] = val
    return PartialOp(domain_size, pattern.arity, table, name=name)


def near_pattern(k: int) -> PolymorphismPattern:
    if k < 3:
        raise ValueError("near-unanimity patterns need k >= 3")
    rows = []
    for i in range(k):
        syms = tuple("y" if j == i else "x" for j in range(k))
        rows.append((syms, "x"))
    return PolymorphismPattern(k, tuple(rows))


def edge_pattern(k: int) -> PolymorphismPattern:
    if k < 2:
        raise ValueError("edge patterns need k >= 2")
    rows = [
        (("x", "x") + ("y",) * (k - 1), "y"),
        (("x", "y", "x") + ("y",) * (k - 2), "y"),
    ]
    for i in range(3, k + 1):
        syms = tuple("x" if j == i else "y" for j in range(k + 1))
        rows.append((syms, "y"))
    return PolymorphismPattern(k + 1, tuple(rows))


def universal_pattern(k: int) -> PolymorphismPattern:
    """Pattern whose k zero-rows stack to columns spelling 1..2^k-1 in binary."""
    if k < 2:
        raise ValueError("universal patterns need k >= 2")
    r = (1 << k) - 1
    rows = []
    for j in range(k):
        bits = tuple(((i + 1) >> (k - 1 - j)) & 1 for i in range(r))
        syms = tuple("y" if b else "x" for b in bits)
        rows.append((syms, "x"))
    return PolymorphismPattern(r, tuple(rows))


def make_near(k: int, domain_size: int = 2) -> PartialOp:
    return instantiate_pattern(near_pattern(k), domain_size, name=f"near{k}")


def make_edge(k: int, domain_size: int = 2) -> PartialOp:
    return instantiate_pattern(edge_pattern(k), domain_size, name=f"edge{k}")


def make_universal(k: int) -> PartialOp:
    """The k-universal operation; defined over the Boolean domain only."""
    return instantiate_pattern(universal_pattern(k), 2, name=f"universal{k}")


def level_of(op: PartialOp) -> int:
    """(|domain| - 2) / 2 for a Boolean pSDI operation."""
    if op.domain_size != 2:
        raise ValueError("levels are defined for Boolean pSDI operations")
    if not op.is_psdi():
        raise ValueError("operation is not self-dual and idempotent")
    return (len(op.table) - 2) // 2


def count_defined_sequences(op: PartialOp, n: int) -> int:
    """Number of tuple sequences of length n on which op is defined."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return len(op.table) ** n


@dataclass(frozen=True)
class PreservationWitness:
    """Rows from R on which the operation is defined but leaves R."""

    tuples: tuple[DomainTuple, ...]
    result: DomainTuple


def validate_witness(op: PartialOp, rel: Relation, witness: PreservationWitness) -> bool:
    if len(witness.tuples) != op.arity:
        return False
    if any(len(t) != rel.arity for t in witness.tuples) or len(witness.result) != rel.arity:
        return False
    if any(t not in rel for t in witness.tuples):
        return False
    if witness.result in rel:
        return False
    for i in range(rel.arity):
        column = tuple(t[i] for t in witness.tuples)
        if not op.defined_on(column) or op(column) != witness.result[i]:
            return False
    return True


@lru_cache(maxsize=64)
def _op_luts(op: PartialOp) -> tuple[int, np.ndarray, np.ndarray]:
    """Per-domain-element value columns and results, ascending by code."""
    elems = op.domain_tuples()
    q = len(elems)
    col_vals = np.array(elems, dtype=np.int64)  # [q, ar(op)]
    res_vals = np.array([op(e) for e in elems], dtype=np.int64)
    return q, col_vals, res_vals


def _build_apps(
    op: PartialOp, m: int, idx: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    q, col_vals, res_vals = _op_luts(op)
    d = op.domain_size
    rows = np.zeros((len(idx), op.arity), dtype=np.int64)
    res = np.zeros(len(idx), dtype=np.int64)
    for j in range(m):
        digit = (idx // q ** (m - 1 - j)) % q
        mult = d ** (m - 1 - j)
        rows += col_vals[digit] * mult
        res += res_vals[digit] * mult
    return rows, res


@lru_cache(maxsize=64)
def _apps_cached(op: PartialOp, m: int) -> tuple[np.ndarray, np.ndarray]:
    q = len(op.table)
    idx = np.arange(q**m, dtype=np.int64)
    return _build_apps(op, m, idx)


def _iter_apps(op: PartialOp, m: int) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    q = len(op.table)
    total = q**m
    if total <= _MATERIALIZE_CAP:
        rows, res = _apps_cached(op, m)
        yield 0, rows, res
        return
    for lo in range(0, total, _CHUNK):
        idx = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        rows, res = _build_apps(op, m, idx)
        yield lo, rows, res


def _witness_from_app(op: PartialOp, rel: Relation, app_index: int) -> PreservationWitness:
    q = len(op.table)
    m = rel.arity
    codes = op.domain_codes()
    columns = []
    rest = app_index
    for j in range(m):
        digit = (rest // q ** (m - 1 - j)) % q
        columns.append(decode_tuple(op.domain_size, op.arity, codes[digit]))
    tuples = tuple(
        tuple(columns[j][a] for j in range(m)) for a in range(op.arity)
    )
    result = tuple(op(tuple(t[j] for t in tuples)) for j in range(m))
    return PreservationWitness(tuples, result)


def preserves(op: PartialOp, rel: Relation) -> Optional[PreservationWitness]:
    """None if op preserves rel, otherwise the first violating application.

    Column-type assignments are scanned in ascending encoded order, so the
    returned witness is deterministic.
    """
    if op.domain_size != rel.domain_size:
        raise ValueError("operation and relation domain sizes differ")
    q = len(op.table)
    if q**rel.arity > 1 << PRESERVES_GUARD_BITS:
        raise FeasibilityError(
            f"|domain|^arity = {q}^{rel.arity} exceeds the 2^{PRESERVES_GUARD_BITS} guard"
        )
    table = rel.table()
    for lo, rows, res in _iter_apps(op, rel.arity):
        bad = table[rows].all(axis=1) & ~table[res]
        if bad.any():
            return _witness_from_app(op, rel, lo + int(np.argmax(bad)))
    return None


def sample_violation(
    op: PartialOp, rel: Relation, trials: int, seed: int = 0
) -> Optional[PreservationWitness]:
    """Randomized fallback for infeasible exact checks.

    Returns a witness if one is sampled; None is inconclusive (not a proof
    of preservation).
    """
    if op.domain_size != rel.domain_size:
        raise ValueError("operation and relation domain sizes differ")
    q, col_vals, res_vals = _op_luts(op)
    d = op.domain_size
    m = rel.arity
    table = rel.table()
    rng = np.random.default_rng(seed)
    digits = rng.integers(0, q, size=(trials, m))
    rows = np.zeros((trials, op.arity), dtype=np.int64)
    res = np.zeros(trials, dtype=np.int64)
    for j in range(m):
        mult = d ** (m - 1 - j)
        rows += col_vals[digits[:, j]] * mult
        res += res_vals[digits[:, j]] * mult
    bad = table[rows].all(axis=1) & ~table[res]
    if not bad.any():
        return None
    i = int(np.argmax(bad))
    app_index = 0
    for j in range(m):
        app_index = app_index * q + int(digits[i, j])
    return _witness_from_app(op, rel, app_index)


def close_under(op: PartialOp, rel: Relation) -> Relation:
    """The smallest superset of rel preserved by op (closure under application)."""
    if op.domain_size != rel.domain_size:
        raise ValueError("operation and relation domain sizes differ")
    size = rel.table_size
    table = np.zeros(size, dtype=bool)
    for code in rel.codes():
        table[code] = True
    changed = True
    while changed:
        changed = False
        for _, rows, res in _iter_apps(op, rel.arity):
            new = res[table[rows].all(axis=1) & ~table[res]]
            if len(new):
                table[new] = True
                changed = True
    mask = 0
    for code in np.flatnonzero(table):
        mask |= 1 << int(code)
    return Relation(rel.domain_size, rel.arity, mask)


@dataclass(frozen=True)
class ClassEntry:
    op_name: str
    level: int
    preserved: bool
    witness: Optional[PreservationWitness]


@dataclass(frozen=True)
class ClassificationReport:
    arity: int
    max_level: int
    entries: tuple[ClassEntry, ...]

    def preserved(self, op_name: str) -> bool:
        for e in self.entries:
            if e.op_name == op_name:
                return e.preserved
        raise KeyError(op_name)

    def as_dict(self) -> dict:
        return {
            "arity": self.arity,
            "max_level": self.max_level,
            "entries": [
                {
                    "op": e.op_name,
                    "level": e.level,
                    "preserved": e.preserved,
                    "witness": None
                    if e.witness is None
                    else {
                        "tuples": [list(t) for t in e.witness.tuples],
                        "result": list(e.witness.result),
                    },
                }
                for e in self.entries
            ],
        }


_HIERARCHY_IMPLICATIONS_CACHE: dict[int, list[tuple[str, str]]] = {}


def _hierarchy_implications(max_level: int) -> list[tuple[str, str]]:
    if max_level in _HIERARCHY_IMPLICATIONS_CACHE:
        return _HIERARCHY_IMPLICATIONS_CACHE[max_level]
    pairs: list[tuple[str, str]] = []
    if max_level >= 3:
        pairs.append(("edge2", "edge3"))
    for k in range(3, max_level + 1):
        pairs.append((f"near{k}", f"edge{k}"))
        pairs.append((f"edge{k}", f"universal{k}"))
        if k + 1 <= max_level:
            pairs.append((f"near{k}", f"near{k + 1}"))
            pairs.append((f"edge{k}", f"edge{k + 1}"))
            pairs.append((f"universal{k}", f"universal{k + 1}"))
    _HIERARCHY_IMPLICATIONS_CACHE[max_level] = pairs
    return pairs


def classify_relation(rel: Relation, max_level: int) -> ClassificationReport:
    """Preservation status of rel against the canonical hierarchy up to max_level."""
    if rel.domain_size != 2:
        raise ValueError("classification is defined for Boolean relations")
    if max_level < 2:
        raise ValueError("max_level must be >= 2")
    ops: list[tuple[str, int, PartialOp]] = [("edge2", 2, make_edge(2, 2))]
    for k in range(3, max_level + 1):
        ops.append((f"near{k}", k, make_near(k, 2)))
        ops.append((f"edge{k}", k, make_edge(k, 2)))
        ops.append((f"universal{k}", k, make_universal(k)))
    for _, _, op in ops:
        if len(op.table) ** rel.arity > 1 << PRESERVES_GUARD_BITS:
            raise FeasibilityError(
                f"max_level {max_level} infeasible at arity {rel.arity}"
            )
    entries = []
    status: dict[str, bool] = {}
    for op_name, level, op in ops:
        witness = preserves(op, rel)
        status[op_name] = witness is None
        entries.append(ClassEntry(op_name, level, witness is None, witness))
    for weaker, stronger in _hierarchy_implications(max_level):
        if status[weaker] and not status[stronger]:
            raise RuntimeError(
                f"hierarchy inclusion violated: preserved by {weaker} but not {stronger}"
            )
    return ClassificationReport(rel.arity, max_level, tuple(entries))


def is_k_decomposable(rel: Relation, k: int) -> bool:
    """Every excluded tuple is excluded by some projection onto <= k positions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = rel.arity
    if n == 0:
        return True
    k = min(k, n)
    d = rel.domain_size
    table = rel.table()
    members = np.flatnonzero(table)
    outside = np.flatnonzero(~table)
    if len(outside) == 0:
        return True
    codes = np.arange(d**n, dtype=np.int64)
    digits = [(codes // d ** (n - 1 - i)) % d for i in range(n)]
    still_covered = np.ones(len(outside), dtype=bool)
    for index_set in itertools.combinations(range(n), k):
        proj = np.zeros(d**n, dtype=np.int64)
        for j, i in enumerate(index_set):
            proj += digits[i] * d ** (k - 1 - j)
        member_proj = np.unique(proj[members])
        still_covered &= np.isin(proj[outside], member_proj)
        if not still_covered.any():
            return True
    return not still_covered.any()


@lru_cache(maxsize=8)
def _subpartitions(n: int) -> tuple[tuple[int, ...], ...]:
    """All families of pairwise-disjoint nonempty blocks of [n], largest first."""
    full = (1 << n) - 1

    def rec(universe: int) -> list[tuple[int, ...]]:
        if universe == 0:
            return [()]
        low = universe & -universe
        rest = universe ^ low
        out = list(rec(rest))  # lowest element in no block
        # lowest element in some block b
        sub = rest
        while True:
            b = low | sub
            for tail in rec(universe & ~b):
                out.append((b,) + tail)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        return out

    fams = rec(full)
    fams.sort(key=len, reverse=True)
    return tuple(fams)


def block_sensitivity(rel: Relation) -> int:
    """Max number of disjoint blocks whose flips each change membership, over all points."""
    if rel.domain_size != 2:
        raise ValueError("block sensitivity is defined for Boolean relations")
    n = rel.arity
    if n > 12:
        raise ValueError("block sensitivity limited to arity <= 12")
    if n == 0:
        return 0
    table = rel.table()
    codes = np.arange(1 << n)
    # quick exit: some point with every singleton sensitive has sensitivity n
    singles = np.ones(1 << n, dtype=bool)
    for b in range(n):
        singles &= table[codes ^ (1 << b)] != table[codes]
    if singles.any():
        return n
    if n <= 4:
        sens = table[codes[:, None] ^ codes[None, :]] != table[codes][:, None]
        for family in _subpartitions(n):
            if not family:
                return 0
            ok = np.ones(1 << n, dtype=bool)
            for block in family:
                ok &= sens[:, block]
            if ok.any():
                return len(family)
        return 0
    best = 0
    for t in range(1 << n):
        flips = table[codes ^ t] != table[t]
        blocks = [int(m) for m in np.flatnonzero(flips) if m]
        blocks.sort(key=lambda m: m.bit_count())
        by_pivot: dict[int, list[int]] = {}
        for m in blocks:
            by_pivot.setdefault(m & -m, []).append(m)

        def pack(allowed: int, count: int) -> None:
            nonlocal best
            if count > best:
                best = count
            if count + allowed.bit_count() <= best or not allowed:
                return
            p = allowed & -allowed
            for m in by_pivot.get(p, ()):
                if m & ~allowed == 0:
                    pack(allowed & ~m, count + 1)
            pack(allowed ^ p, count)

        pack((1 << n) - 1, 0)
        if best == n:
            return best
    return best
