"""Prime-field vector arithmetic for coded packets.

A packet vector carries ``n`` payload chunks followed by ``m`` coding
chunks, all elements of GF(q) for a prime q.  Linear combination,
rank (degrees of freedom), span reduction, and decoding all operate on
plain Python integers, so any prime size works, from q=11 test groups
up to 160-bit production fields.

Chunks are stored as Z_q values (zero included): linear combinations
can produce zero chunks even when honest coding coefficients are drawn
from Z_q^* only.
"""

from __future__ import annotations

import random
from dataclasses import dataclass


@dataclass(frozen=True)
class CodedVector:
    """One coded packet: payload chunks plus coding vector, over GF(q)."""

    payload: tuple[int, ...]
    coding_vector: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.payload)

    @property
    def m(self) -> int:
        return len(self.coding_vector)

    @property
    def chunks(self) -> tuple[int, ...]:
        """The full packet vector: payload followed by coding vector."""
        return self.payload + self.coding_vector

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.chunks)


def vector(payload, coding_vector, q: int) -> CodedVector:
    """Build a CodedVector with all chunks reduced mod q."""
    return CodedVector(
        payload=tuple(int(c) % q for c in payload),
        coding_vector=tuple(int(c) % q for c in coding_vector),
    )


def standard_basis_originals(payload_rows, q: int) -> list[CodedVector]:
    """Wrap m payload rows as originals with standard-basis coding vectors."""
    m = len(payload_rows)
    return [
        vector(row, [1 if j == i else 0 for j in range(m)], q)
        for i, row in enumerate(payload_rows)
    ]


def linear_combine(vectors: list[CodedVector], coeffs: list[int], q: int) -> CodedVector:
    """Compute sum(a_i * E_i) mod q component-wise over all n+m chunks.

    Raises ValueError on empty input or on any dimension mismatch.
    """
    if not vectors or not coeffs:
        raise ValueError("linear_combine requires non-empty inputs")
    if len(vectors) != len(coeffs):
        raise ValueError(f"{len(vectors)} vectors but {len(coeffs)} coefficients")
    n, m = vectors[0].n, vectors[0].m
    payload = [0] * n
    coding = [0] * m
    for v, a in zip(vectors, coeffs):
        if v.n != n or v.m != m:
            raise ValueError(f"dimension mismatch: ({v.n},{v.m}) vs ({n},{m})")
        a = a % q
        for i, c in enumerate(v.payload):
            payload[i] = (payload[i] + a * c) % q
        for i, c in enumerate(v.coding_vector):
            coding[i] = (coding[i] + a * c) % q
    return CodedVector(payload=tuple(payload), coding_vector=tuple(coding))


def row_reduce(rows: list[list[int]], q: int) -> tuple[list[list[int]], list[int]]:
    """Row-echelon form of a matrix over GF(q).

    Works on a copy.  Returns (reduced rows, pivot column indices);
    the rank is ``len(pivot_cols)``.
    """
    R = [[c % q for c in row] for row in rows]
    if not R:
        return [], []
    width = len(R[0])
    pivot_cols: list[int] = []
    pivot_row = 0
    for col in range(width):
        found = -1
        for r in range(pivot_row, len(R)):
            if R[r][col] != 0:
                found = r
                break
        if found == -1:
            continue
        R[pivot_row], R[found] = R[found], R[pivot_row]
        inv = pow(R[pivot_row][col], -1, q)
        R[pivot_row] = [(c * inv) % q for c in R[pivot_row]]
        for r in range(len(R)):
            if r != pivot_row and R[r][col] != 0:
                f = R[r][col]
                R[r] = [(a - f * b) % q for a, b in zip(R[r], R[pivot_row])]
        pivot_cols.append(col)
        pivot_row += 1
    return R, pivot_cols


def matrix_rank(rows: list[list[int]], q: int) -> int:
    """Rank of a matrix of GF(q) rows (0 for an empty matrix)."""
    rows = [r for r in rows if r]
    if not rows:
        return 0
    _, pivots = row_reduce(rows, q)
    return len(pivots)


def rank(vectors: list[CodedVector], q: int) -> int:
    """Degrees of freedom: rank of the coding vectors over GF(q)."""
    return matrix_rank([list(v.coding_vector) for v in vectors], q)


def left_nullspace(rows: list[list[int]], q: int) -> list[list[int]]:
    """Basis of {a : sum(a_i * rows[i]) = 0} over GF(q).

    Row-reduces the matrix augmented with an identity block; the
    identity-block parts of the all-zero reduced rows span the left
    nullspace.
    """
    k = len(rows)
    if k == 0:
        return []
    width = len(rows[0])
    aug = [list(rows[i]) + [1 if j == i else 0 for j in range(k)] for i in range(k)]
    R, _ = row_reduce(aug, q)
    basis = []
    for row in R:
        if all(c == 0 for c in row[:width]) and any(c != 0 for c in row[width:]):
            basis.append(row[width:])
    return basis


def reduce_against(row: list[int], basis: list[list[int]], q: int) -> list[int]:
    """Reduce a row against an echelon basis; zero result means in-span."""
    row = [c % q for c in row]
    for b in basis:
        lead = next((i for i, c in enumerate(b) if c != 0), None)
        if lead is None or row[lead] == 0:
            continue
        f = (row[lead] * pow(b[lead], -1, q)) % q
        row = [(a - f * c) % q for a, c in zip(row, b)]
    return row


class Span:
    """Incrementally maintained row span over GF(q) (echelon basis)."""

    def __init__(self, q: int, width: int):
        self.q = q
        self.width = width
        self.basis: list[list[int]] = []

    @property
    def dim(self) -> int:
        return len(self.basis)

    def residual(self, row) -> list[int]:
        return reduce_against(list(row), self.basis, self.q)

    def contains(self, row) -> bool:
        return all(c == 0 for c in self.residual(row))

    def add(self, row) -> bool:
        """Insert a row; returns True if it increased the dimension."""
        res = self.residual(row)
        lead = next((i for i, c in enumerate(res) if c != 0), None)
        if lead is None:
            return False
        inv = pow(res[lead], -1, self.q)
        res = [(c * inv) % self.q for c in res]
        self.basis.append(res)
        self.basis.sort(key=lambda b: next(i for i, c in enumerate(b) if c != 0))
        return True

    def copy(self) -> "Span":
        s = Span(self.q, self.width)
        s.basis = [list(b) for b in self.basis]
        return s


def random_nonzero(q: int, rng: random.Random) -> int:
    """Uniform draw from Z_q^* = [1, q)."""
    return rng.randrange(1, q)


def solve_originals(vectors: list[CodedVector], q: int) -> list[tuple[int, ...]] | None:
    """Recover the m original payload rows from received coded packets.

    Solves C * O = P where C stacks the coding vectors and P the
    payloads.  Returns None when the coding vectors do not reach
    rank m.
    """
    if not vectors:
        return None
    n, m = vectors[0].n, vectors[0].m
    aug = [list(v.coding_vector) + list(v.payload) for v in vectors]
    R, pivots = row_reduce(aug, q)
    if len([p for p in pivots if p < m]) < m:
        return None
    originals: list[tuple[int, ...]] = [()] * m
    for row, piv in zip(R, pivots):
        if piv < m:
            originals[piv] = tuple(row[m : m + n])
    return originals
