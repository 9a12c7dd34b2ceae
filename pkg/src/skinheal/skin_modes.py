"""Left-edge eigenstates of the semi-infinite lattice.

At an energy ``E0`` with winding ``W < 0`` the characteristic roots outside
the unit circle give decaying plane waves ``beta**(-n) v``.  A skin mode is
the combination that vanishes on the padded sites ``0, -1, ..., 1-s``, so that
the boundary rows of the semi-infinite Hamiltonian reduce to the bulk
recursion.  There are exactly ``|W|`` independent such combinations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegeneracyError, DomainError, NotASkinEnergyError
from .models import TruncatedHamiltonian
from .spectra import winding_integral_adaptive, winding_roots

NULL_RTOL = 1e-10
NULLVEC_MIN_SV = 1e-6


@dataclass(frozen=True)
class SkinMode:
    """One normalized skin mode ``psi_n = sum_i c_i beta_i**(-n) v_i`` on sites ``1..N``."""

    E0: complex
    W: int
    roots_used: np.ndarray
    vectors: np.ndarray
    coefficients: np.ndarray
    amplitudes: np.ndarray
    normalization: str = "unit_l2_sites_1_to_N;first_significant_real_positive"

    @property
    def N(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def bands(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def state(self) -> np.ndarray:
        """Flattened state vector, site index slow."""
        return self.amplitudes.reshape(-1)

    @property
    def min_root_modulus(self) -> float:
        used = np.abs(self.coefficients) > 1e-12 * np.abs(self.coefficients).max()
        return float(np.abs(self.roots_used[used]).min())

    def amplitude_at(self, n) -> np.ndarray:
        """Amplitudes at arbitrary sites (``n`` may exceed ``N``), shape ``(len(n), bands)``."""
        return _evaluate(self.roots_used, self.vectors, self.coefficients, np.asarray(n))


def _evaluate(roots, vectors, coeffs, n) -> np.ndarray:
    # beta**(-n) via log form: moduli span many decades at large n
    logb = np.log(roots.astype(complex))
    phase = np.exp(-np.outer(n, logb))
    return (phase * coeffs[None, :]) @ vectors.T


def _nullvector(M: np.ndarray) -> np.ndarray:
    u, sv, vh = np.linalg.svd(M)
    if len(sv) > 1 and sv[-2] < NULLVEC_MIN_SV * max(sv[0], 1.0):
        raise DegeneracyError(f"Bloch matrix has a degenerate nullspace (singular values {sv})")
    return vh[-1].conj()


def _normalize_phase(psi: np.ndarray) -> complex:
    flat = psi.reshape(-1)
    significant = np.flatnonzero(np.abs(flat) > 1e-8 * np.abs(flat).max())
    z = flat[significant[0]]
    return np.conj(z) / abs(z)


def build_skin_modes(model, E0: complex, N: int) -> list[SkinMode]:
    """All ``|W(E0)|`` orthonormalized left-edge skin modes sampled on sites ``1..N``."""
    E0 = complex(E0)
    if model.bands == 1:
        W = winding_roots(model, E0)
    else:
        W = winding_integral_adaptive(model, E0)
    if W >= 0:
        raise NotASkinEnergyError(f"W({E0}) = {W}; skin modes need W < 0")
    rs = model.char_roots(E0)
    if rs.degenerate:
        raise DegeneracyError(f"near-degenerate characteristic roots at E0={E0}")
    out = rs.roots[np.abs(rs.roots) > 1.0]
    b = model.bands
    n_constraints = model.s * b
    if len(out) - n_constraints != -W:
        raise DegeneracyError(
            f"{len(out)} decaying roots and {n_constraints} constraints do not leave |W|={-W} modes")

    if b == 1:
        vectors = np.ones((1, len(out)), dtype=complex)
    else:
        vectors = np.stack([_nullvector(model.bloch_matrix(beta) - E0 * np.eye(b)) for beta in out], axis=1)

    # psi_{-j} = sum_i c_i beta_i**j v_i = 0 for j = 0..s-1
    C = np.concatenate([(out**j)[None, :] * vectors for j in range(model.s)], axis=0)
    _, sv, vh = np.linalg.svd(C)
    sv_full = np.zeros(len(out))
    sv_full[:len(sv)] = sv
    null_dim = int(np.count_nonzero(sv_full < NULL_RTOL * sv_full.max()))
    if null_dim != -W:
        raise DegeneracyError(f"boundary constraints have a {null_dim}-dim nullspace, expected {-W}")
    basis = vh[len(out) - null_dim:].conj()

    n = np.arange(1, N + 1)
    raw = [_evaluate(out, vectors, c, n).reshape(-1) for c in basis]
    # Gram-Schmidt over sites 1..N; coefficients follow the same combination.
    Q, R = np.linalg.qr(np.stack(raw, axis=1))
    coeff = scipy.linalg.solve_triangular(R, np.eye(null_dim), lower=False).T @ basis
    modes = []
    for i in range(null_dim):
        c = coeff[i]
        psi = _evaluate(out, vectors, c, n)
        scale = 1.0 / np.linalg.norm(psi)
        psi = psi * scale
        ph = _normalize_phase(psi)
        modes.append(SkinMode(E0=E0, W=W, roots_used=out, vectors=vectors,
                              coefficients=c * scale * ph, amplitudes=psi * ph))
    return modes


def build_skin_mode(model, E0: complex, N: int, which: int = 0) -> SkinMode:
    return build_skin_modes(model, E0, N)[which]


def build_skin_mode_multiband(model, E0: complex, N: int, which: int = 0) -> SkinMode:
    if model.bands < 2:
        raise DomainError("multiband construction needs a block model")
    return build_skin_mode(model, E0, N, which)


def eigen_residual(H: TruncatedHamiltonian, mode: SkinMode, window: tuple[int, int] | None = None,
                   E: complex | None = None) -> float:
    """Relative residual ``|(H psi - E psi)|_window| / |psi|_window|`` on sites ``window`` (inclusive).

    The default window drops the last ``reach`` sites, whose rows feel the
    right truncation edge.
    """
    E = mode.E0 if E is None else complex(E)
    lo, hi = window if window is not None else (1, H.N - H.reach)
    if hi < lo:
        raise DomainError("empty residual window")
    psi = mode.state
    res = H.matrix @ psi - E * psi
    sl = slice((lo - 1) * H.bands, hi * H.bands)
    return float(np.linalg.norm(res[sl]) / np.linalg.norm(psi[sl]))
