"""Extension-oracle representations of constraints.

An extension oracle for an n-ary relation R answers, for positions
i_1..i_k and values t, whether t lies in the projection of R onto those
positions, i.e. whether the partial assignment extends to a member of R.
Oracles here are read-only after construction and may be queried
concurrently.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence

from .relations import Relation, encode_tuple, project


@dataclass(frozen=True)
class ParityPadSpec:
    """m parity bits over n base variables: pad j is the XOR over parity_sets[j]."""

    n: int
    parity_sets: tuple[tuple[int, ...], ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("base variable count must be >= 0")
        for s in self.parity_sets:
            if any(not 0 <= i < self.n for i in s):
                raise ValueError("parity set index out of range")
            if list(s) != sorted(set(s)):
                raise ValueError("parity sets must be sorted and duplicate-free")

    @property
    def m(self) -> int:
        return len(self.parity_sets)

    def pad_values(self, base: Sequence[int]) -> tuple[int, ...]:
        return tuple(
            sum(base[i] for i in s) & 1 for s in self.parity_sets
        )


class ExtensionOracle(ABC):
    """Membership-in-projection queries for a fixed relation."""

    arity: int
    domain_size: int

    @abstractmethod
    def query(self, indices: Sequence[int], values: Sequence[int]) -> bool:
        """Whether the partial assignment extends to a member of the relation."""

    def _check_query(self, indices: Sequence[int], values: Sequence[int]) -> None:
        if len(indices) != len(values):
            raise ValueError("indices and values must have equal length")
        for i in indices:
            if not 0 <= i < self.arity:
                raise ValueError(f"query index {i} out of range for arity {self.arity}")
        for v in values:
            if not 0 <= v < self.domain_size:
                raise ValueError(f"query value {v} out of domain range")

    def _dedupe(
        self, indices: Sequence[int], values: Sequence[int]
    ) -> Optional[dict[int, int]]:
        """Position -> value map; None when repeated positions conflict."""
        assigned: dict[int, int] = {}
        for i, v in zip(indices, values):
            if assigned.setdefault(i, v) != v:
                return None
        return assigned


class ExplicitOracle(ExtensionOracle):
    """Oracle backed by an explicitly stored relation, with projection caching."""

    def __init__(self, relation: Relation) -> None:
        self.relation = relation
        self.arity = relation.arity
        self.domain_size = relation.domain_size
        self._projections: dict[tuple[int, ...], Relation] = {}

    def query(self, indices: Sequence[int], values: Sequence[int]) -> bool:
        self._check_query(indices, values)
        key = tuple(indices)
        proj = self._projections.get(key)
        if proj is None:
            proj = project(self.relation, key)
            self._projections[key] = proj
        return tuple(values) in proj


def explicit_oracle(relation: Relation) -> ExplicitOracle:
    return ExplicitOracle(relation)


class LinearEquationOracle(ExtensionOracle):
    """Boolean solutions of sum(coeffs[i] * x_i) = target (mod modulus)."""

    def __init__(self, coeffs: Sequence[int], target: int, modulus: int) -> None:
        if modulus < 2:
            raise ValueError("modulus must be >= 2")
        self.coeffs = tuple(c % modulus for c in coeffs)
        self.target = target % modulus
        self.modulus = modulus
        self.arity = len(self.coeffs)
        self.domain_size = 2

    def query(self, indices: Sequence[int], values: Sequence[int]) -> bool:
        self._check_query(indices, values)
        assigned = self._dedupe(indices, values)
        if assigned is None:
            return False
        m = self.modulus
        acc = sum(self.coeffs[i] * v for i, v in assigned.items()) % m
        reachable = 1  # bitmask over residues reachable from free positions
        for i in range(self.arity):
            if i not in assigned:
                c = self.coeffs[i]
                shifted = ((reachable << c) | (reachable >> (m - c))) & ((1 << m) - 1)
                reachable |= shifted
        need = (self.target - acc) % m
        return bool((reachable >> need) & 1)


def linear_equation_oracle(
    coeffs: Sequence[int], target: int, modulus: int
) -> LinearEquationOracle:
    return LinearEquationOracle(coeffs, target, modulus)


class SymmetricWeightOracle(ExtensionOracle):
    """Oracle for the Boolean relation accepting the given Hamming weights."""

    def __init__(self, arity: int, weights: Sequence[int]) -> None:
        self.arity = arity
        self.domain_size = 2
        self.weights = frozenset(weights)
        if any(w < 0 or w > arity for w in self.weights):
            raise ValueError(f"weights must lie in 0..{arity}")

    def query(self, indices: Sequence[int], values: Sequence[int]) -> bool:
        self._check_query(indices, values)
        assigned = self._dedupe(indices, values)
        if assigned is None:
            return False
        w = sum(assigned.values())
        free = self.arity - len(assigned)
        return any(w + j in self.weights for j in range(free + 1))


def gf2_solvable(rows: list[int], n_vars: int) -> bool:
    """Consistency of an augmented GF(2) system; bit i is x_i, bit n_vars the RHS."""
    basis: list[int] = []
    for row in rows:
        for b in basis:
            low = b & -b
            if row & low:
                row ^= b
        if row:
            if row == 1 << n_vars:
                return False
            basis.append(row)
    return True


class ParityPaddedClauseOracle(ExtensionOracle):
    """Oracle for a single-excluded-tuple clause conjoined with a parity padding.

    The represented relation has arity n + m: the n base variables plus the
    m parity bits of the pad.  The clause constrains clause_vars, excluding
    exactly one tuple.  Each query rebuilds a GF(2) system from the parity
    definitions and the assigned values, then checks for a solution that
    avoids the excluded tuple on the clause variables.
    """

    def __init__(
        self,
        clause_relation: Relation,
        pad: ParityPadSpec,
        clause_vars: Optional[Sequence[int]] = None,
    ) -> None:
        if clause_relation.domain_size != 2:
            raise ValueError("clause relations are Boolean")
        k = clause_relation.arity
        if k < 1 or clause_relation.size != (1 << k) - 1:
            raise ValueError("clause relation must exclude exactly one tuple")
        missing = next(
            c for c in range(1 << k) if not clause_relation.has_code(c)
        )
        self.excluded = tuple((missing >> (k - 1 - i)) & 1 for i in range(k))
        self.clause_vars = (
            tuple(range(k)) if clause_vars is None else tuple(clause_vars)
        )
        if len(self.clause_vars) != k or len(set(self.clause_vars)) != k:
            raise ValueError("clause_vars must list k distinct base variables")
        if any(not 0 <= v < pad.n for v in self.clause_vars):
            raise ValueError("clause variables must be base variables")
        self.pad = pad
        self.arity = pad.n + pad.m
        self.domain_size = 2
        self._pad_masks = [
            sum(1 << i for i in s) for s in pad.parity_sets
        ]

    def query(self, indices: Sequence[int], values: Sequence[int]) -> bool:
        self._check_query(indices, values)
        n = self.pad.n
        rhs_bit = 1 << n
        rows = []
        for i, v in zip(indices, values):
            if i < n:
                rows.append((1 << i) | (rhs_bit if v else 0))
            else:
                rows.append(self._pad_masks[i - n] | (rhs_bit if v else 0))
        if not gf2_solvable(rows, n):
            return False
        # some solution must differ from the excluded tuple on a clause variable
        for pos, var in enumerate(self.clause_vars):
            forced = rows + [(1 << var) | (rhs_bit if 1 - self.excluded[pos] else 0)]
            if gf2_solvable(forced, n):
                return True
        return False


def parity_padded_clause_oracle(
    clause_relation: Relation,
    pad: ParityPadSpec,
    clause_vars: Optional[Sequence[int]] = None,
) -> ParityPaddedClauseOracle:
    return ParityPaddedClauseOracle(clause_relation, pad, clause_vars)


class SubsetSumBlockOracle(ExtensionOracle):
    """One bit-block of a Subset-Sum equation with guessed carries.

    Selector variables z pick weights; the oracle accepts partial
    assignments extendable so that the selected weights' bits in
    [bit_lo, bit_hi), plus carry_in, equal block_target with overflow
    carry_out.  Extendability is decided by subset-sum tabulation over the
    unassigned selectors.
    """

    def __init__(
        self,
        weights: Sequence[int],
        block_target: int,
        bit_lo: int,
        bit_hi: int,
        carry_in: int,
        carry_out: int,
    ) -> None:
        n = len(weights)
        if not 0 <= bit_lo < bit_hi:
            raise ValueError("need 0 <= bit_lo < bit_hi")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        for name, c in (("carry_in", carry_in), ("carry_out", carry_out)):
            if not 0 <= c <= n:
                raise ValueError(f"{name} {c} out of range 0..{n}")
        width = bit_hi - bit_lo
        if not 0 <= block_target < 1 << width:
            raise ValueError("block target does not fit the bit range")
        self.weights = tuple(weights)
        self.block_target = block_target
        self.bit_lo = bit_lo
        self.bit_hi = bit_hi
        self.carry_in = carry_in
        self.carry_out = carry_out
        self.arity = n
        self.domain_size = 2
        self.block_weights = tuple(
            (w >> bit_lo) & ((1 << width) - 1) for w in weights
        )
        self.need = block_target + (carry_out << width) - carry_in

    def query(self, indices: Sequence[int], values: Sequence[int]) -> bool:
        self._check_query(indices, values)
        assigned = self._dedupe(indices, values)
        if assigned is None:
            return False
        acc = sum(self.block_weights[i] * v for i, v in assigned.items())
        rest = self.need - acc
        if rest < 0:
            return False
        sums = 1  # bitmask of achievable subset sums over unassigned selectors
        for i in range(self.arity):
            if i not in assigned:
                sums |= sums << self.block_weights[i]
        return bool((sums >> rest) & 1)


def subset_sum_block_oracle(
    weights: Sequence[int],
    block_target: int,
    bit_lo: int,
    bit_hi: int,
    carry_in: int,
    carry_out: int,
) -> SubsetSumBlockOracle:
    return SubsetSumBlockOracle(
        weights, block_target, bit_lo, bit_hi, carry_in, carry_out
    )
