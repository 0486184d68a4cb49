"""Prime-field arithmetic on numpy integer arrays, plus linear algebra over F_q."""

from __future__ import annotations

import numpy as np


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


class PrimeField:
    """GF(q) for prime q.  Elements are plain ints / int64 arrays in ``[0, q)``."""

    def __init__(self, q: int):
        q = int(q)
        if not _is_prime(q):
            raise ValueError(f"field order must be prime, got {q}")
        self.q = q

    def __repr__(self) -> str:
        return f"PrimeField({self.q})"

    def __eq__(self, other) -> bool:
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self) -> int:
        return hash(("PrimeField", self.q))

    def element(self, x):
        return np.mod(np.asarray(x, dtype=np.int64), self.q)

    def add(self, a, b):
        return np.mod(np.asarray(a, dtype=np.int64) + b, self.q)

    def sub(self, a, b):
        return np.mod(np.asarray(a, dtype=np.int64) - b, self.q)

    def neg(self, a):
        return np.mod(-np.asarray(a, dtype=np.int64), self.q)

    def mul(self, a, b):
        return np.mod(np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64), self.q)

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(np.mod(a, self.q) == 0):
            raise ZeroDivisionError("zero has no multiplicative inverse")
        # Fermat: a^(q-2)
        out = np.ones_like(a)
        base = np.mod(a, self.q)
        e = self.q - 2
        while e:
            if e & 1:
                out = np.mod(out * base, self.q)
            base = np.mod(base * base, self.q)
            e >>= 1
        return out

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def random(self, rng: np.random.Generator, size=None, nonzero: bool = False):
        lo = 1 if nonzero else 0
        return rng.integers(lo, self.q, size=size, dtype=np.int64)

    def matmul(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.q > 3_000_000:
            raise ValueError("field too large for int64 matrix products")
        return np.mod(a @ b, self.q)

    def row_reduce(self, a):
        """Reduced row echelon form and pivot columns of a single matrix."""
        m = self.element(a).copy()
        rows, cols = m.shape
        pivots = []
        r = 0
        for c in range(cols):
            if r == rows:
                break
            nz = np.flatnonzero(m[r:, c])
            if nz.size == 0:
                continue
            p = r + nz[0]
            m[[r, p]] = m[[p, r]]
            m[r] = self.mul(m[r], self.inv(m[r, c]))
            for i in range(rows):
                if i != r and m[i, c]:
                    m[i] = self.sub(m[i], self.mul(m[i, c], m[r]))
            pivots.append(c)
            r += 1
        return m, pivots

    def rank(self, a) -> int:
        return len(self.row_reduce(a)[1])

    def batched_rank(self, a) -> np.ndarray:
        """Rank of every matrix in a (B, rows, cols) stack, vectorized over B."""
        m = self.element(a).copy()
        b, rows, cols = m.shape
        rank = np.zeros(b, dtype=np.int64)
        idx = np.arange(b)
        for c in range(cols):
            # rows at or below the current pivot row that are nonzero in column c
            below = np.arange(rows)[None, :] >= rank[:, None]
            cand = (m[:, :, c] != 0) & below
            has = cand.any(axis=1) & (rank < rows)
            if not has.any():
                continue
            p = np.argmax(cand, axis=1)
            sel = idx[has]
            r = rank[has]
            pr = p[has]
            row_p = m[sel, pr].copy()
            m[sel, pr] = m[sel, r]
            m[sel, r] = row_p
            pivot_row = self.mul(row_p, self.inv(row_p[:, c])[:, None])
            m[sel, r] = pivot_row
            factors = m[sel, :, c].copy()
            factors[np.arange(sel.size), r] = 0
            m[sel] = self.sub(m[sel], self.mul(factors[:, :, None], pivot_row[:, None, :]))
            rank[has] += 1
        return rank

    def solve(self, a, b):
        """Solve ``a x = b`` for x when ``a`` has full column rank.

        ``b`` may have several right-hand-side columns.  Returns None if the
        column rank is deficient.  Extra consistent rows are allowed.
        """
        a = self.element(a)
        b = self.element(b)
        if b.ndim == 1:
            b = b[:, None]
        n = a.shape[1]
        aug, pivots = self.row_reduce(np.hstack([a, b]))
        if pivots[:n] != list(range(n)) or len(pivots) < n:
            return None
        return aug[:n, n:]
