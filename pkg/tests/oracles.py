"""Independent reference computations used by the tests.

Nothing here calls into the package's numerical engines: roots come from
mpmath, Hamiltonians are assembled element by element, windings are counted
by brute-force angle accumulation, and exact time evolution uses expm.
"""

import cmath

import mpmath
import numpy as np
import scipy.linalg

FIG2 = {-2: 1.0, -1: 1.0, 0: 0.0, 1: 0.7, 2: 0.8}
FIG4 = dict(t1=0.75, delta_a=0.25, delta_b=-0.15, t0=0.05, V=0.8)


def poly_roots_mp(coeffs_high_first, dps=40):
    """All roots of a polynomial via mpmath's Durand-Kerner iteration."""
    with mpmath.workdps(dps):
        rts = mpmath.polyroots([mpmath.mpc(c) for c in coeffs_high_first], maxsteps=400, extraprec=2 * dps)
        return np.array([complex(r) for r in rts])


def symbol_roots(hops: dict, E: complex) -> np.ndarray:
    """Roots of beta**r (P(beta) - E) sorted by modulus, via mpmath."""
    r = -min(hops)
    s = max(hops)
    c = [0j] * (r + s + 1)  # c[k] multiplies beta**k
    for l, v in hops.items():
        c[l + r] += v
    c[r] -= E
    rts = poly_roots_mp(c[::-1])
    return rts[np.argsort(np.abs(rts), kind="stable")]


def two_chain_roots(t1, delta_a, delta_b, t0, V, E) -> np.ndarray:
    """Roots of beta**2 det(H(beta) - E) expanded by hand."""
    a_l, a_r = t1 + delta_a, t1 - delta_a
    b_l, b_r = t1 + delta_b, t1 - delta_b
    # chain a: beta * (a_l/beta + a_r beta + V - E) = a_r beta^2 + (V - E) beta + a_l
    pa = np.array([a_r, V - E, a_l], dtype=complex)
    pb = np.array([b_r, -V - E, b_l], dtype=complex)
    poly = np.polymul(pa, pb)
    poly[2] -= t0**2
    rts = poly_roots_mp(list(poly))
    return rts[np.argsort(np.abs(rts), kind="stable")]


def dense_hamiltonian(hops: dict, N: int, periodic=False, bands=1) -> np.ndarray:
    """H[n, l] = T_{n-l}, assembled one element at a time."""
    H = np.zeros((N * bands, N * bands), dtype=complex)
    for n in range(N):
        for l in range(N):
            d = n - l
            if periodic:
                for cand in (d, d - N, d + N):
                    if cand in hops:
                        d = cand
                        break
            if d in hops:
                T = np.atleast_2d(np.asarray(hops[d], dtype=complex))
                H[n * bands:(n + 1) * bands, l * bands:(l + 1) * bands] += T
    return H


def two_chain_hops(t1, delta_a, delta_b, t0, V) -> dict:
    return {
        -1: np.diag([t1 + delta_a, t1 + delta_b]),
        0: np.array([[V, t0], [t0, -V]]),
        1: np.diag([t1 - delta_a, t1 - delta_b]),
    }


def winding_brute(det_fn, E, K=20000) -> int:
    """Count windings of det(H(e^{ik}) - E) around 0 by summing principal angle steps."""
    total = 0.0
    prev = det_fn(1.0, E)
    for j in range(1, K + 1):
        cur = det_fn(cmath.exp(2j * cmath.pi * j / K), E)
        total += cmath.phase(cur / prev)
        prev = cur
    return int(round(total / (2 * cmath.pi)))


def single_band_det(hops):
    return lambda beta, E: sum(v * beta**l for l, v in hops.items()) - E


def two_chain_det(t1, delta_a, delta_b, t0, V):
    def det(beta, E):
        a = (t1 + delta_a) / beta + (t1 - delta_a) * beta + V - E
        b = (t1 + delta_b) / beta + (t1 - delta_b) * beta - V - E
        return a * b - t0 * t0
    return det


def exact_evolution(H: np.ndarray, psi0: np.ndarray, t: float) -> np.ndarray:
    return scipy.linalg.expm(-1j * H * t) @ psi0


def obc_eigs_mp(H: np.ndarray, dps: int = 50) -> np.ndarray:
    """Eigenvalues of a small non-normal matrix at high precision."""
    with mpmath.workdps(dps):
        M = mpmath.matrix([[mpmath.mpc(complex(x)) for x in row] for row in H])
        ev = mpmath.eig(M, left=False, right=False)
        return np.array([complex(e) for e in ev])


def saddle_energies(hops: dict) -> np.ndarray:
    """Energies at critical points of P that lie on the GBZ (no scanning involved)."""
    r, s = -min(hops), max(hops)
    # beta**(r+1) P'(beta) = sum l t_l beta**(l + r)
    c = [0j] * (r + s + 1)
    for l, v in hops.items():
        c[l + r] += l * v
    out = []
    for b in poly_roots_mp(c[::-1]):
        E = sum(v * b ** l for l, v in hops.items())
        m = np.sort(np.abs(symbol_roots(hops, E)))
        if abs(m[r] - m[r - 1]) < 1e-6 and np.isclose(abs(b), m[r], rtol=1e-6):
            out.append(complex(E))
    return np.array(out)
