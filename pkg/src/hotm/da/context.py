"""Monomial bookkeeping shared by every polynomial of a given (order, nvars)."""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np


def _exponents_of_degree(nvars: int, degree: int) -> list[tuple[int, ...]]:
    out = []
    for combo in combinations_with_replacement(range(nvars), degree):
        e = [0] * nvars
        for v in combo:
            e[v] += 1
        out.append(tuple(e))
    # graded-lex: within a degree, larger power of x0 first
    out.sort(reverse=True)
    return out


class DaContext:
    """Order/variable-count pair plus the precomputed index tables.

    Contexts are interned: ``DaContext(5, 6) is DaContext(5, 6)``.  Every
    table is read-only once built, so a context can be shared freely.

    Attributes
    ----------
    order, nvars : int
        Maximum total degree ``k`` and number of variables ``v``.
    size : int
        Number of monomials of total degree <= k.
    exponents : ndarray, shape (size, nvars)
        Exponent tuples in graded-lex order (degree 0 first).
    degree : ndarray, shape (size,)
    mul_i, mul_j, mul_t : ndarray
        Multiplication table: monomial ``mul_i[p] * mul_j[p]`` lands on
        ``mul_t[p]``; only pairs with total degree <= k are listed.
    parent, pvar : ndarray
        For monomial ``m > 0``: ``x^m = x^parent[m] * x[pvar[m]]``.
    """

    _cache: dict[tuple[int, int], "DaContext"] = {}

    def __new__(cls, order: int, nvars: int):
        key = (int(order), int(nvars))
        ctx = cls._cache.get(key)
        if ctx is None:
            if key[0] < 1 or key[1] < 1:
                raise ValueError(f"order and nvars must be >= 1, got {key}")
            ctx = super().__new__(cls)
            ctx._build(*key)
            cls._cache[key] = ctx
        return ctx

    def __reduce__(self):
        return (DaContext, (self.order, self.nvars))

    def _build(self, order: int, nvars: int) -> None:
        self.order = order
        self.nvars = nvars
        exps: list[tuple[int, ...]] = []
        starts = []
        for d in range(order + 1):
            starts.append(len(exps))
            exps.extend(_exponents_of_degree(nvars, d))
        starts.append(len(exps))
        self.size = len(exps)
        self.degree_start = np.array(starts, dtype=np.intp)
        self.exponents = np.array(exps, dtype=np.int64).reshape(self.size, nvars)
        self.exponents.flags.writeable = False
        self.degree = self.exponents.sum(axis=1)
        self.index = {e: n for n, e in enumerate(exps)}

        parent = np.zeros(self.size, dtype=np.intp)
        pvar = np.zeros(self.size, dtype=np.intp)
        for m in range(1, self.size):
            e = list(exps[m])
            v = next(i for i, p in enumerate(e) if p)
            e[v] -= 1
            parent[m] = self.index[tuple(e)]
            pvar[m] = v
        self.parent = parent
        self.pvar = pvar

        # exponent tuples packed into integers so sums can be looked up in bulk
        weights = (order + 1) ** np.arange(nvars, dtype=np.int64)
        keys = self.exponents @ weights
        key_order = np.argsort(keys)
        sorted_keys = keys[key_order]
        mi, mj, mt = [], [], []
        for a in range(self.size):
            nb = self.degree_start[order - self.degree[a] + 1]
            target = key_order[np.searchsorted(sorted_keys, keys[a] + keys[:nb])]
            mi.append(np.full(nb, a, dtype=np.intp))
            mj.append(np.arange(nb, dtype=np.intp))
            mt.append(target.astype(np.intp))
        mi, mj, mt = np.concatenate(mi), np.concatenate(mj), np.concatenate(mt)
        order_t = np.argsort(mt, kind="stable")
        self.mul_i = np.ascontiguousarray(mi[order_t])
        self.mul_j = np.ascontiguousarray(mj[order_t])
        self.mul_t = np.ascontiguousarray(mt[order_t])

        self._deriv: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._integ: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def __repr__(self) -> str:
        return f"DaContext(order={self.order}, nvars={self.nvars})"

    def check_var(self, var: int) -> int:
        if not 0 <= var < self.nvars:
            raise IndexError(f"variable index {var} out of range for nvars={self.nvars}")
        return var

    def derivative_table(self, var: int):
        """(source, target, factor) triples for d/dx_var."""
        tab = self._deriv.get(var)
        if tab is None:
            src, dst, fac = [], [], []
            for m in range(self.size):
                p = int(self.exponents[m, var])
                if p:
                    e = self.exponents[m].copy()
                    e[var] -= 1
                    src.append(m)
                    dst.append(self.index[tuple(int(x) for x in e)])
                    fac.append(float(p))
            tab = (np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp),
                   np.array(fac))
            self._deriv[var] = tab
        return tab

    def antiderivative_table(self, var: int):
        """(source, target, factor) triples for the x_var antiderivative."""
        tab = self._integ.get(var)
        if tab is None:
            src, dst, fac = [], [], []
            for m in range(self.size):
                if self.degree[m] < self.order:
                    e = self.exponents[m].copy()
                    e[var] += 1
                    src.append(m)
                    dst.append(self.index[tuple(int(x) for x in e)])
                    fac.append(1.0 / e[var])
            tab = (np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp),
                   np.array(fac))
            self._integ[var] = tab
        return tab

    @lru_cache(maxsize=None)
    def pure_power_indices(self, var: int) -> np.ndarray:
        """Indices of x_var**j for j = 0..order."""
        out = []
        for j in range(self.order + 1):
            e = [0] * self.nvars
            e[var] = j
            out.append(self.index[tuple(e)])
        return np.array(out, dtype=np.intp)
