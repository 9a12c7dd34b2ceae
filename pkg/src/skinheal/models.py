"""Lattice models: Bloch matrices, characteristic roots and real-space truncations.

Every model is described by hop blocks ``T_m`` (``bands x bands``) for
``m`` in ``[-r, s]``:

    H(beta) = sum_m T_m beta**m,      (H psi)_n = sum_m T_m psi_{n-m}.

A plane wave ``psi_n = beta**(-n) v`` is an eigenvector of the bulk rows
whenever ``H(beta) v = E v``.  Sites are 1-based in all public functions;
in state vectors the site index is the slow index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.sparse as sp

from . import laurent
from .errors import DomainError
from .laurent import LaurentSymbol, RootSet

Boundary = Literal["open", "periodic"]


class _Model:
    """Shared behaviour; subclasses provide ``bands``, ``r``, ``s`` and ``hops``."""

    bands: int
    r: int
    s: int

    @property
    def hops(self) -> dict[int, np.ndarray]:
        raise NotImplementedError

    @property
    def pole_order(self) -> int:
        return self.bands * self.r

    @property
    def n_roots(self) -> int:
        return self.bands * (self.r + self.s)

    @property
    def reach(self) -> int:
        return max(self.r, self.s)

    @property
    def max_hop(self) -> float:
        return max(float(np.abs(T).max()) for T in self.hops.values())

    def bloch_matrix(self, beta: complex) -> np.ndarray:
        beta = complex(beta)
        if beta == 0:
            raise DomainError("Bloch matrix is singular at beta = 0")
        return self.bloch_matrices(np.array([beta]))[0]

    def bloch_matrices(self, betas) -> np.ndarray:
        betas = np.asarray(betas, dtype=complex)
        out = np.zeros(betas.shape + (self.bands, self.bands), dtype=complex)
        for m, T in self.hops.items():
            out += (betas**m)[..., None, None] * T
        return out

    def bloch_eigenvalues(self, k) -> np.ndarray:
        """Band energies at real wave numbers ``k``, shape ``k.shape + (bands,)``."""
        mats = self.bloch_matrices(np.exp(1j * np.asarray(k, dtype=float)))
        if self.bands == 1:
            return mats[..., 0]
        return np.linalg.eigvals(mats)

    def char_det(self, betas, E: complex) -> np.ndarray:
        """``det(H(beta) - E)`` for an array of ``beta``."""
        mats = self.bloch_matrices(betas)
        if self.bands == 1:
            return mats[..., 0, 0] - E
        mats = mats - E * np.eye(self.bands)
        if self.bands == 2:
            return mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
        return np.linalg.det(mats)

    def char_roots(self, E: complex) -> RootSet:
        return laurent.block_char_roots(self.hops, self.r, self.s, E)

    def char_roots_batch(self, energies) -> np.ndarray:
        return laurent.block_char_roots_batch(self.hops, self.r, self.s, energies)


@dataclass(frozen=True)
class SingleBandModel(_Model):
    symbol: LaurentSymbol

    bands = 1

    @property
    def r(self) -> int:
        return self.symbol.r

    @property
    def s(self) -> int:
        return self.symbol.s

    @cached_property
    def hops(self) -> dict[int, np.ndarray]:
        return {l: np.array([[v]], dtype=complex) for l, v in self.symbol.coeffs.items() if v != 0}

    def bloch_matrices(self, betas) -> np.ndarray:
        return np.asarray(laurent.laurent_eval(self.symbol, betas))[..., None, None]

    def char_roots(self, E: complex) -> RootSet:
        return laurent.char_roots(self.symbol, E)

    def char_roots_batch(self, energies) -> np.ndarray:
        return laurent.char_roots_batch(self.symbol, energies)

    @classmethod
    def from_hops(cls, hops: dict[int, complex]) -> "SingleBandModel":
        return cls(LaurentSymbol(hops))


@dataclass(frozen=True)
class TwoChainModel(_Model):
    """Two side-coupled Hatano-Nelson chains.

    Chain ``a`` (``b``) hops with ``t1 + delta`` towards the left and
    ``t1 - delta`` towards the right, carries on-site energy ``+V`` (``-V``),
    and the chains are coupled on every site by ``t0``.
    """

    t1: float
    delta_a: float
    delta_b: float
    t0: float
    V: float

    bands = 2
    r = 1
    s = 1

    def __post_init__(self):
        for name in ("t1", "delta_a", "delta_b", "t0", "V"):
            if not np.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not np.any(self.hops[1]) or not np.any(self.hops[-1]):
            raise DomainError("two-chain model needs nonzero left and right hopping")

    @cached_property
    def hops(self) -> dict[int, np.ndarray]:
        t1, da, db = self.t1, self.delta_a, self.delta_b
        return {
            -1: np.diag([t1 + da, t1 + db]).astype(complex),
            0: np.array([[self.V, self.t0], [self.t0, -self.V]], dtype=complex),
            1: np.diag([t1 - da, t1 - db]).astype(complex),
        }

    def bloch_matrix_k(self, k: float) -> np.ndarray:
        """Bloch matrix written in the Pauli form with ``cos k`` and ``sin k``."""
        d0 = 2 * self.t1 * np.cos(k) - 1j * (self.delta_a + self.delta_b) * np.sin(k)
        dz = self.V + 1j * (self.delta_b - self.delta_a) * np.sin(k)
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        sz = np.array([[1, 0], [0, -1]], dtype=complex)
        return d0 * np.eye(2) + self.t0 * sx + dz * sz


def char_roots_multiband(model: TwoChainModel, E: complex) -> RootSet:
    """All ``bands * (r + s)`` roots of ``beta**(bands r) det(H(beta) - E)``."""
    return model.char_roots(E)


def bloch_matrix(model, beta: complex) -> np.ndarray:
    return model.bloch_matrix(beta)


@dataclass(frozen=True)
class TruncatedHamiltonian:
    N: int
    bands: int
    boundary: str
    matrix: sp.csr_matrix
    reach: int

    @property
    def dim(self) -> int:
        return self.N * self.bands

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm_inf(self) -> float:
        return float(abs(self.matrix).sum(axis=1).max())

    def site_slice(self, n: int) -> slice:
        return slice((n - 1) * self.bands, n * self.bands)


def build_truncated(model, N: int, boundary: Boundary = "open") -> TruncatedHamiltonian:
    """Finite ``N``-site Hamiltonian; ``periodic`` wraps the same diagonals around."""
    if boundary not in ("open", "periodic"):
        raise DomainError(f"unknown boundary {boundary!r}")
    if N <= 2 * model.reach:
        raise DomainError(f"N={N} too small; need N > {2 * model.reach}")
    b = model.bands
    rows, cols, vals = [], [], []
    sites = np.arange(N)
    for m, T in model.hops.items():
        src = sites - m
        if boundary == "open":
            keep = (src >= 0) & (src < N)
            dst, src = sites[keep], src[keep]
        else:
            dst, src = sites, src % N
        for i in range(b):
            for j in range(b):
                if T[i, j] == 0:
                    continue
                rows.append(dst * b + i)
                cols.append(src * b + j)
                vals.append(np.full(len(dst), T[i, j], dtype=complex))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(N * b, N * b))
    mat.sum_duplicates()
    return TruncatedHamiltonian(N=N, bands=b, boundary=boundary, matrix=mat, reach=model.reach)


def right_ghost_coupling(model, N: int, ghost: np.ndarray) -> np.ndarray:
    """Contribution of sites ``N+1 .. N+r`` to rows of an open ``N``-site truncation.

    ``ghost`` has shape ``(r, bands)`` holding the amplitudes of the missing
    sites.  Adding the returned vector to ``H_open @ psi`` reproduces the
    rows of the semi-infinite lattice.
    """
    b, r = model.bands, model.r
    ghost = np.asarray(ghost, dtype=complex).reshape(r, b)
    out = np.zeros(N * b, dtype=complex)
    for m, T in model.hops.items():
        if m >= 0:
            continue
        for n in range(max(1, N + m + 1), N + 1):
            l = n - m
            if l > N:
                out[(n - 1) * b:n * b] += T @ ghost[l - N - 1]
    return out
