"""Finite relations over {0..d-1}^r with dense bitmask membership tables.

A tuple (t[0], ..., t[r-1]) is encoded as a base-d integer with position 0
as the most significant digit, so ascending codes coincide with the
lexicographic order on tuples.  A relation stores one bit per code; the
table is capped at d^r <= 2^28 entries, larger relations must be handled
through extension oracles instead.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

DomainTuple = tuple[int, ...]

MAX_TABLE_BITS = 28


def encode_tuple(domain_size: int, values: Sequence[int]) -> int:
    code = 0
    for v in values:
        code = code * domain_size + v
    return code


def decode_tuple(domain_size: int, arity: int, code: int) -> DomainTuple:
    out = [0] * arity
    for i in range(arity - 1, -1, -1):
        code, out[i] = divmod(code, domain_size)
    return tuple(out)


@lru_cache(maxsize=512)
def _member_table(domain_size: int, arity: int, mask: int) -> np.ndarray:
    size = domain_size**arity
    table = np.zeros(size, dtype=bool)
    m = mask
    while m:
        low = m & -m
        table[low.bit_length() - 1] = True
        m ^= low
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class Relation:
    """An arity-r relation over {0..d-1}, membership as a bitmask over codes."""

    domain_size: int
    arity: int
    mask: int

    def __post_init__(self) -> None:
        if self.domain_size < 2:
            raise ValueError(f"domain size must be >= 2, got {self.domain_size}")
        if self.arity < 0:
            raise ValueError(f"arity must be >= 0, got {self.arity}")
        if self.domain_size**self.arity > 1 << MAX_TABLE_BITS:
            raise ValueError(
                f"dense table d^r = {self.domain_size}^{self.arity} exceeds 2^{MAX_TABLE_BITS}"
            )
        if self.mask < 0 or self.mask >> (self.domain_size**self.arity):
            raise ValueError("membership mask out of range for d^r table")

    @property
    def table_size(self) -> int:
        return self.domain_size**self.arity

    @property
    def size(self) -> int:
        return self.mask.bit_count()

    def is_empty(self) -> bool:
        return self.mask == 0

    def is_full(self) -> bool:
        return self.mask == (1 << self.table_size) - 1

    def has_code(self, code: int) -> bool:
        return (self.mask >> code) & 1 == 1

    def __contains__(self, values: Sequence[int]) -> bool:
        if len(values) != self.arity:
            return False
        return self.has_code(encode_tuple(self.domain_size, values))

    def codes(self) -> Iterator[int]:
        m = self.mask
        while m:
            low = m & -m
            yield low.bit_length() - 1
            m ^= low

    def tuples(self) -> Iterator[DomainTuple]:
        for code in self.codes():
            yield decode_tuple(self.domain_size, self.arity, code)

    def table(self) -> np.ndarray:
        """Membership as a read-only boolean array indexed by tuple code."""
        return _member_table(self.domain_size, self.arity, self.mask)

    def __repr__(self) -> str:  # abbreviated, masks can be huge
        return f"Relation(d={self.domain_size}, arity={self.arity}, size={self.size})"


def make_relation(
    domain_size: int, arity: int, tuples: Iterable[Sequence[int]]
) -> Relation:
    """Build a relation from explicit member tuples (duplicates ignored)."""
    mask = 0
    for t in tuples:
        if len(t) != arity:
            raise ValueError(f"tuple {tuple(t)} has arity {len(t)}, expected {arity}")
        for v in t:
            if not 0 <= v < domain_size:
                raise ValueError(f"value {v} out of range for domain size {domain_size}")
        mask |= 1 << encode_tuple(domain_size, t)
    return Relation(domain_size, arity, mask)


def full_relation(domain_size: int, arity: int) -> Relation:
    return Relation(domain_size, arity, (1 << domain_size**arity) - 1)


def empty_relation(domain_size: int, arity: int) -> Relation:
    return Relation(domain_size, arity, 0)


def eq_relation(domain_size: int) -> Relation:
    """The binary equality relation over the given domain."""
    return make_relation(domain_size, 2, [(x, x) for x in range(domain_size)])


def one_in_k_relation(k: int) -> Relation:
    """Boolean tuples of Hamming weight exactly one (the 1-in-k relation)."""
    return make_relation(2, k, [tuple(int(i == j) for i in range(k)) for j in range(k)])


def _digit_columns(domain_size: int, arity: int) -> np.ndarray:
    codes = np.arange(domain_size**arity, dtype=np.int64)
    cols = np.empty((arity, len(codes)), dtype=np.int64)
    for i in range(arity):
        cols[i] = (codes // domain_size ** (arity - 1 - i)) % domain_size
    return cols


def _from_table(domain_size: int, arity: int, table: np.ndarray) -> Relation:
    mask = 0
    for code in np.flatnonzero(table):
        mask |= 1 << int(code)
    return Relation(domain_size, arity, mask)


def project(rel: Relation, indices: Sequence[int]) -> Relation:
    """Project onto the given positions; repeats are allowed."""
    for i in indices:
        if not 0 <= i < rel.arity:
            raise ValueError(f"projection index {i} out of range for arity {rel.arity}")
    d = rel.domain_size
    k = len(indices)
    mask = 0
    for t in rel.tuples():
        mask |= 1 << encode_tuple(d, [t[i] for i in indices])
    return Relation(d, k, mask)


def apply_sign_pattern(rel: Relation, signs: Sequence[str]) -> Relation:
    """Flip every member at the '-' positions of the sign pattern."""
    if rel.domain_size != 2:
        raise ValueError("sign patterns apply to Boolean relations only")
    if len(signs) != rel.arity:
        raise ValueError(f"sign pattern length {len(signs)} != arity {rel.arity}")
    flip = 0
    for i, s in enumerate(signs):
        if s == "-":
            flip |= 1 << (rel.arity - 1 - i)
        elif s != "+":
            raise ValueError(f"sign must be '+' or '-', got {s!r}")
    mask = 0
    for code in rel.codes():
        mask |= 1 << (code ^ flip)
    return Relation(2, rel.arity, mask)


def sign_pattern_clearing(values: Sequence[int]) -> tuple[str, ...]:
    """The sign pattern s with values^s = 0...0 (flip exactly the 1 positions)."""
    return tuple("-" if v else "+" for v in values)


def fix_argument(rel: Relation, index: int, value: int, drop: bool = False) -> Relation:
    """Keep members with t[index] = value; with drop, remove the position."""
    if not 0 <= index < rel.arity:
        raise ValueError(f"index {index} out of range for arity {rel.arity}")
    if not 0 <= value < rel.domain_size:
        raise ValueError(f"value {value} out of range for domain size {rel.domain_size}")
    d = rel.domain_size
    mask = 0
    new_arity = rel.arity - 1 if drop else rel.arity
    for t in rel.tuples():
        if t[index] != value:
            continue
        kept = t[:index] + t[index + 1 :] if drop else t
        mask |= 1 << encode_tuple(d, kept)
    return Relation(d, new_arity, mask)


def conjoin(
    defs: Sequence[tuple[Relation, Sequence[int]]],
    n_vars: int,
    domain_size: Optional[int] = None,
) -> Relation:
    """Quantifier-free conjunction of constraint applications over n_vars.

    Scopes may repeat variables, which subsumes explicit equality constraints.
    """
    if defs:
        d = defs[0][0].domain_size
    elif domain_size is not None:
        d = domain_size
    else:
        d = 2
    table = np.ones(d**n_vars, dtype=bool)
    cols = _digit_columns(d, n_vars)
    for rel, scope in defs:
        if rel.domain_size != d:
            raise ValueError("all relations in a conjunction must share the domain size")
        if len(scope) != rel.arity:
            raise ValueError(
                f"scope length {len(scope)} != relation arity {rel.arity}"
            )
        for v in scope:
            if not 0 <= v < n_vars:
                raise ValueError(f"scope variable {v} out of range for {n_vars} vars")
        proj = np.zeros(d**n_vars, dtype=np.int64)
        for j, v in enumerate(scope):
            proj += cols[v] * d ** (rel.arity - 1 - j)
        table &= rel.table()[proj]
    return _from_table(d, n_vars, table)


@dataclass(frozen=True)
class SymmetricWeightSet:
    """Accepted Hamming weights of a totally symmetric Boolean relation."""

    arity: int
    weights: frozenset[int]

    def __post_init__(self) -> None:
        if any(w < 0 or w > self.arity for w in self.weights):
            raise ValueError(f"weights must lie in 0..{self.arity}")


def symmetric_relation(arity: int, weights: Iterable[int]) -> Relation:
    """The Boolean relation accepting exactly the tuples of the given weights."""
    wset = frozenset(weights)
    if any(w < 0 or w > arity for w in wset):
        raise ValueError(f"weights must lie in 0..{arity}")
    mask = 0
    for code in range(1 << arity):
        if code.bit_count() in wset:
            mask |= 1 << code
    return Relation(2, arity, mask)


def symmetric_weights(rel: Relation) -> Optional[SymmetricWeightSet]:
    """The weight set witnessing total symmetry, or None if not symmetric."""
    if rel.domain_size != 2:
        raise ValueError("symmetric weight sets are defined for Boolean relations")
    in_weights: set[int] = set()
    out_weights: set[int] = set()
    for code in range(1 << rel.arity):
        (in_weights if rel.has_code(code) else out_weights).add(code.bit_count())
    if in_weights & out_weights:
        return None
    return SymmetricWeightSet(rel.arity, frozenset(in_weights))


def symmetric_transform(rel: Relation, mode: str, p: Optional[int] = None) -> Relation:
    """Shift-down / truncate / group a symmetric Boolean relation.

    All three are quantifier-free constructions: shift_down fixes one
    argument to 1, truncate fixes one to 0, and group(p) binds arguments in
    blocks of p to a single variable (truncating the arity to a multiple of
    p first).
    """
    if symmetric_weights(rel) is None:
        raise ValueError("symmetric_transform requires a symmetric Boolean relation")
    if mode == "shift_down":
        if rel.arity == 0:
            raise ValueError("cannot shift a nullary relation")
        return fix_argument(rel, rel.arity - 1, 1, drop=True)
    if mode == "truncate":
        if rel.arity == 0:
            raise ValueError("cannot truncate a nullary relation")
        return fix_argument(rel, rel.arity - 1, 0, drop=True)
    if mode == "group":
        if p is None or p <= 1:
            raise ValueError("group mode needs a block size p > 1")
        work = rel
        while work.arity % p:
            work = fix_argument(work, work.arity - 1, 0, drop=True)
        groups = work.arity // p
        scope = [j // p for j in range(work.arity)]
        return conjoin([(work, scope)], groups, domain_size=2)
    raise ValueError(f"unknown mode {mode!r}")


def all_tuples(domain_size: int, arity: int) -> Iterator[DomainTuple]:
    return itertools.product(range(domain_size), repeat=arity)
