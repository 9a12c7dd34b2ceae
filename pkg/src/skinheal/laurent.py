"""Laurent symbols of banded Toeplitz matrices and their characteristic roots.

A single-band lattice with hoppings ``t_l`` (``l`` in ``[-r, s]``) has the
symbol ``P(beta) = sum_l t_l beta**l``.  Everything downstream (PBC loop,
GBZ, winding numbers, skin modes) is phrased through the roots of
``beta**r * (P(beta) - E)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DomainError, NumericalError

TIE_RTOL = 1e-12
# an exact double root comes back split by ~sqrt(machine eps)
DEGENERATE_ATOL = 1e-7


@dataclass(frozen=True)
class LaurentSymbol:
    """Hopping amplitudes ``t_l`` of a banded Toeplitz matrix, ``H[n, m] = t_{n-m}``.

    ``r`` and ``s`` are the largest left/right hop orders.  They are inferred
    from ``coeffs`` when omitted; when given they must be tight.
    """

    coeffs: Mapping[int, complex]
    r: int | None = None
    s: int | None = None
    _items: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        items = {}
        for l, v in dict(self.coeffs).items():
            if int(l) != l:
                raise DomainError(f"hop offset {l!r} is not an integer")
            items[int(l)] = items.get(int(l), 0j) + complex(v)
        nonzero = [l for l, v in items.items() if v != 0]
        if not nonzero:
            raise DomainError("symbol has no nonzero hopping amplitude")
        r = -min(nonzero) if self.r is None else int(self.r)
        s = max(nonzero) if self.s is None else int(self.s)
        if r < 1 or s < 1:
            raise DomainError(f"need r >= 1 and s >= 1, got r={r}, s={s}")
        if any(l < -r or l > s for l in nonzero):
            raise DomainError(f"hop offsets {sorted(nonzero)} fall outside [-{r}, {s}]")
        if items.get(-r, 0) == 0 or items.get(s, 0) == 0:
            raise DomainError(f"t_{{-{r}}} and t_{{{s}}} must be nonzero (r, s are tight)")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", s)
        clean = tuple(sorted((l, v) for l, v in items.items() if -r <= l <= s))
        object.__setattr__(self, "_items", clean)
        object.__setattr__(self, "coeffs", dict(clean))

    def __eq__(self, other):
        if not isinstance(other, LaurentSymbol):
            return NotImplemented
        a = {l: v for l, v in self._items if v != 0}
        b = {l: v for l, v in other._items if v != 0}
        return (self.r, self.s, a) == (other.r, other.s, b)

    def __hash__(self):
        return hash((self.r, self.s, tuple((l, v) for l, v in self._items if v != 0)))

    @property
    def degree(self) -> int:
        return self.r + self.s

    def t(self, l: int) -> complex:
        return self.coeffs.get(l, 0j)

    def poly_coeffs(self, E: complex = 0.0) -> np.ndarray:
        """Ascending coefficients of ``beta**r * (P(beta) - E)``, length ``r + s + 1``."""
        c = np.zeros(self.degree + 1, dtype=complex)
        for l, v in self._items:
            c[l + self.r] += v
        c[self.r] -= E
        return c

    def transpose(self) -> "LaurentSymbol":
        """Symbol of the mirrored lattice, ``t_l -> t_{-l}``."""
        return LaurentSymbol({-l: v for l, v in self._items})


@dataclass(frozen=True)
class RootSet:
    """Characteristic roots at energy ``E``, sorted by ascending modulus."""

    roots: np.ndarray
    E: complex
    pole_order: int
    degenerate: bool = False

    def __len__(self):
        return len(self.roots)

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.roots)

    def count_inside(self, radius: float = 1.0) -> int:
        return int(np.count_nonzero(np.abs(self.roots) < radius))


def laurent_eval(symbol: LaurentSymbol, beta):
    """Evaluate ``P(beta)``; ``beta`` may be an array."""
    beta = np.asarray(beta, dtype=complex)
    if np.any(beta == 0):
        raise DomainError("P(beta) has a pole of order r at beta = 0")
    out = np.zeros_like(beta)
    for l, v in symbol._items:
        out = out + v * beta**l
    return out[()] if out.ndim == 0 else out


def sort_roots(roots: np.ndarray) -> np.ndarray:
    """Sort by modulus; moduli equal to ``TIE_RTOL`` are ordered by phase in [0, 2pi)."""
    roots = np.asarray(roots, dtype=complex)
    mod = np.abs(roots)
    phase = np.mod(np.angle(roots), 2 * np.pi)
    order = list(np.argsort(mod, kind="stable"))
    out = []
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and mod[order[j]] - mod[order[i]] <= TIE_RTOL * max(mod[order[i]], 1e-300):
            j += 1
        group = sorted(order[i:j], key=lambda k: phase[k])
        out.extend(group)
        i = j
    return roots[out]


def _has_near_duplicates(roots: np.ndarray) -> bool:
    if len(roots) < 2:
        return False
    d = np.abs(roots[:, None] - roots[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return bool(d.min() < DEGENERATE_ATOL)


def companion(monic: np.ndarray) -> np.ndarray:
    """Companion matrix of ``x**d + a_{d-1} x**(d-1) + ... + a_0`` given ascending ``a_0..a_{d-1}``."""
    d = len(monic)
    C = np.zeros((d, d), dtype=complex)
    C[1:, :-1] = np.eye(d - 1)
    C[:, -1] = -monic
    return C


def char_roots(symbol: LaurentSymbol, E: complex) -> RootSet:
    """All ``r + s`` roots of ``beta**r (P(beta) - E)`` via the companion matrix."""
    c = symbol.poly_coeffs(E)
    try:
        roots = np.linalg.eigvals(companion(c[:-1] / c[-1]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"companion eigensolver failed at E={E!r}: {exc}") from exc
    roots = sort_roots(roots)
    return RootSet(roots=roots, E=complex(E), pole_order=symbol.r, degenerate=_has_near_duplicates(roots))


def char_roots_batch(symbol: LaurentSymbol, energies) -> np.ndarray:
    """Modulus-sorted roots for many energies at once, shape ``energies.shape + (r + s,)``.

    No phase tie-break; meant for grid scans.
    """
    E = np.asarray(energies, dtype=complex)
    c = symbol.poly_coeffs(0.0)
    d = symbol.degree
    C = np.zeros(E.shape + (d, d), dtype=complex)
    C[..., 1:, :-1] = np.eye(d - 1)
    monic = np.broadcast_to(c[:-1] / c[-1], E.shape + (d,)).copy()
    monic[..., symbol.r] -= E / c[-1]
    C[..., :, -1] = -monic
    roots = np.linalg.eigvals(C)
    idx = np.argsort(np.abs(roots), axis=-1, kind="stable")
    return np.take_along_axis(roots, idx, axis=-1)


def modulus_rank(rootset: RootSet, index: int) -> complex:
    """The ``index``-th root (1-based) by ascending modulus, phase breaking ties."""
    n = len(rootset.roots)
    if not 1 <= index <= n:
        raise IndexError(f"index {index} out of range 1..{n}")
    return complex(rootset.roots[index - 1])


# Block (multiband) engine ---------------------------------------------------


def block_companion(hops: Mapping[int, np.ndarray], r: int, s: int, E) -> np.ndarray:
    """Block companion matrices of ``beta**r (H(beta) - E)`` for an array of energies.

    ``hops[m]`` is the ``b x b`` amplitude multiplying ``beta**m``.  Requires an
    invertible leading block ``hops[s]``.
    """
    E = np.asarray(E, dtype=complex)
    b = next(iter(hops.values())).shape[0]
    d = r + s
    lead_inv = np.linalg.inv(np.asarray(hops[s], dtype=complex))
    blocks = []
    for j in range(d):
        A = np.asarray(hops.get(j - r, np.zeros((b, b))), dtype=complex)
        blocks.append(lead_inv @ A)
    C = np.zeros(E.shape + (b * d, b * d), dtype=complex)
    C[..., b:, :-b] = np.eye(b * (d - 1))
    for j in range(d):
        C[..., j * b:(j + 1) * b, -b:] = -blocks[j]
    C[..., r * b:(r + 1) * b, -b:] += E[..., None, None] * lead_inv
    return C


def block_char_roots(hops: Mapping[int, np.ndarray], r: int, s: int, E: complex) -> RootSet:
    """Roots of ``det(beta**r (H(beta) - E)) = 0``, ``b (r + s)`` of them, modulus sorted."""
    b = next(iter(hops.values())).shape[0]
    lead = np.asarray(hops[s], dtype=complex)
    try:
        if abs(np.linalg.det(lead)) > 1e-14 * max(1.0, np.abs(lead).max()) ** b:
            roots = np.linalg.eigvals(block_companion(hops, r, s, E))
        else:
            roots = _pencil_roots(hops, r, s, E, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"block eigensolver failed at E={E!r}: {exc}") from exc
    roots = sort_roots(roots)
    return RootSet(roots=roots, E=complex(E), pole_order=b * r, degenerate=_has_near_duplicates(roots))


def _pencil_roots(hops, r, s, E, b):
    import scipy.linalg

    d = r + s
    n = b * d
    A = np.zeros((n, n), dtype=complex)
    B = np.eye(n, dtype=complex)
    A[b:, :-b] = np.eye(b * (d - 1))
    for j in range(d):
        Aj = np.asarray(hops.get(j - r, np.zeros((b, b))), dtype=complex)
        if j == r:
            Aj = Aj - E * np.eye(b)
        A[j * b:(j + 1) * b, -b:] = -Aj
    B[-b:, -b:] = np.asarray(hops[s], dtype=complex)
    w = scipy.linalg.eigvals(A, B)
    return w[np.isfinite(w)]


def block_char_roots_batch(hops, r, s, energies) -> np.ndarray:
    E = np.asarray(energies, dtype=complex)
    roots = np.linalg.eigvals(block_companion(hops, r, s, E))
    idx = np.argsort(np.abs(roots), axis=-1, kind="stable")
    return np.take_along_axis(roots, idx, axis=-1)
