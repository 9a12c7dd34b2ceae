"""PBC loops, winding numbers, the generalized Brillouin zone and the healing threshold."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, EmptyGbzError, NumericalError, RefineKError, WindingUndefinedError

LOOP_ATOL = 1e-8


# PBC loop -------------------------------------------------------------------


@dataclass(frozen=True)
class PbcLoop:
    """Bloch energies on ``K`` uniform wave numbers; ``energies[:, j]`` is one tracked band."""

    k: np.ndarray
    energies: np.ndarray

    @property
    def bands(self) -> int:
        return self.energies.shape[1]

    def bounding_box(self, inflate: float = 0.1) -> tuple[float, float, float, float]:
        E = self.energies.ravel()
        x0, x1 = E.real.min(), E.real.max()
        y0, y1 = E.imag.min(), E.imag.max()
        dx = max(x1 - x0, 1e-3) * inflate
        dy = max(y1 - y0, 1e-3) * inflate
        return (float(x0 - dx), float(x1 + dx), float(y0 - dy), float(y1 + dy))


def _track_branches(values: np.ndarray) -> np.ndarray:
    """Reorder eigenvalues along the first axis so each column varies continuously."""
    out = values.copy()
    b = values.shape[1]
    if b == 1:
        return out
    perms = [list(p) for p in itertools.permutations(range(b))]
    for i in range(1, len(out)):
        prev = out[i - 1]
        cost = [np.abs(out[i][p] - prev).sum() for p in perms]
        out[i] = out[i][perms[int(np.argmin(cost))]]
    return out


def pbc_spectrum(model, K: int = 1024) -> PbcLoop:
    if K < 64:
        raise DomainError(f"K={K} too small; need K >= 64")
    k = -np.pi + 2 * np.pi * np.arange(K) / K
    return PbcLoop(k=k, energies=_track_branches(model.bloch_eigenvalues(k).reshape(K, model.bands)))


# Winding numbers --------------------------------------------------------------


def winding_roots(model, E: complex) -> int:
    """Winding number by the argument principle: roots inside the unit circle minus the pole order."""
    rs = model.char_roots(E)
    if np.any(np.abs(np.abs(rs.roots) - 1.0) < LOOP_ATOL):
        raise WindingUndefinedError(f"E={E!r} lies on the PBC loop")
    return rs.count_inside() - model.pole_order


def winding_roots_batch(model, energies) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``winding_roots``; returns ``(W, on_loop)`` with ``W = 0`` where ``on_loop``."""
    roots = model.char_roots_batch(energies)
    mod = np.abs(roots)
    on_loop = np.any(np.abs(mod - 1.0) < LOOP_ATOL, axis=-1)
    W = np.count_nonzero(mod < 1.0, axis=-1) - model.pole_order
    return np.where(on_loop, 0, W), on_loop


def winding_integral(model, E: complex, K: int = 1024) -> int:
    """Winding of ``det(H(e^{ik}) - E)`` accumulated over ``K`` steps of ``k``."""
    if K < 256:
        raise DomainError(f"K={K} too small; need K >= 256")
    total = 0.0
    max_jump = 0.0
    chunk = 1 << 16
    prev = None
    for start in range(0, K + 1, chunk):
        j = np.arange(start, min(start + chunk, K + 1))
        d = model.char_det(np.exp(1j * (-np.pi + 2 * np.pi * j / K)), E)
        if np.any(d == 0):
            raise WindingUndefinedError(f"E={E!r} lies on the PBC loop")
        if prev is not None:
            d = np.concatenate([[prev], d])
        steps = np.angle(d[1:] / d[:-1])
        if steps.size:
            max_jump = max(max_jump, float(np.abs(steps).max()))
            total += float(steps.sum())
        prev = d[-1]
    if max_jump > np.pi / 2:
        raise RefineKError(
            f"phase step {max_jump:.3f} rad exceeds pi/2 at K={K} for E={E!r}", suggested_K=4 * K
        )
    w = total / (2 * np.pi)
    W = int(round(w))
    if abs(w - W) > 0.05:
        raise NumericalError(f"winding {w:.4f} is not close to an integer at E={E!r}")
    return W


def winding_integral_adaptive(model, E: complex, K: int = 1024, max_K: int = 1 << 22) -> int:
    """``winding_integral`` with ``K`` quadrupled until phase unwrapping is unambiguous."""
    while True:
        try:
            return winding_integral(model, E, K)
        except RefineKError:
            if K >= max_K:
                raise
            K = min(4 * K, max_K)


# GBZ / OBC spectrum -------------------------------------------------------------


@dataclass(frozen=True)
class GbzSet:
    """Points ``(beta, E)`` on the generalized Brillouin zone, ordered canonically."""

    beta: np.ndarray
    E: np.ndarray
    f_min: float = 0.0
    f_max: float = 0.0

    def __len__(self):
        return len(self.beta)

    @property
    def obc_energies(self) -> np.ndarray:
        return self.E[::2]


@dataclass(frozen=True)
class Grid:
    """Rectangular box of the complex energy plane split into ``resolution**2`` cells."""

    box: tuple[float, float, float, float]
    resolution: int = 400

    def nodes(self) -> np.ndarray:
        x0, x1, y0, y1 = self.box
        xs = np.linspace(x0, x1, self.resolution + 1)
        ys = np.linspace(y0, y1, self.resolution + 1)
        return xs[None, :] + 1j * ys[:, None]

    @property
    def spacing(self) -> float:
        x0, x1, y0, y1 = self.box
        return max(x1 - x0, y1 - y0) / self.resolution


def default_grid(model, resolution: int = 400, K: int = 1024) -> Grid:
    return Grid(pbc_spectrum(model, K).bounding_box(0.1), resolution)


def _rows_parallel(fn, E: np.ndarray, threads: int) -> np.ndarray:
    """Apply ``fn`` to blocks of rows; result is independent of ``threads``."""
    if threads <= 1 or E.shape[0] < 2 * threads:
        return fn(E)
    blocks = np.array_split(np.arange(E.shape[0]), threads)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(lambda idx: fn(E[idx]), blocks))
    return np.concatenate(parts, axis=0)


def _nearest(roots: np.ndarray, target: np.ndarray) -> np.ndarray:
    idx = np.argmin(np.abs(roots - target[:, None]), axis=1)
    return roots[np.arange(len(roots)), idx], idx


def obc_gbz_scan(model, grid: Grid | None = None, tol: float = 1e-8, threads: int = 1,
                 tie_rtol: float = 1e-5) -> GbzSet:
    """Extract the GBZ as the level set ``|beta_M| = |beta_{M+1}|`` (``M`` = pole order).

    Along each grid edge the two middle roots at the first node are followed
    by continuity; an edge is crossed by the GBZ when their modulus order
    swaps.  The crossing is refined by bisection to ``tol`` in energy and
    both tied roots are emitted as GBZ points.
    """
    grid = grid or default_grid(model)
    M = model.pole_order
    E = grid.nodes()
    roots = _rows_parallel(model.char_roots_batch, E, threads)
    mod = np.abs(roots)
    f = mod[..., M] - mod[..., M - 1]

    starts, ends = [], []
    for a, b in (((slice(None), slice(0, -1)), (slice(None), slice(1, None))),
                 ((slice(0, -1), slice(None)), (slice(1, None), slice(None)))):
        ra, rb = roots[a].reshape(-1, roots.shape[-1]), roots[b].reshape(-1, roots.shape[-1])
        ea, eb = E[a].ravel(), E[b].ravel()
        lo_a, lo_b = ra[:, M - 1], ra[:, M]
        hi_a, ia = _nearest(rb, lo_a)
        hi_b, ib = _nearest(rb, lo_b)
        cross = (ia != ib) & (np.abs(hi_a) > np.abs(hi_b))
        starts.append(np.stack([ea[cross], lo_a[cross], lo_b[cross]], axis=1))
        ends.append(eb[cross])
    starts = np.concatenate(starts)
    ends = np.concatenate(ends)
    if len(starts) == 0:
        raise EmptyGbzError(
            f"no GBZ crossing on the grid; modulus-gap field in [{f.min():.3g}, {f.max():.3g}]",
            f_min=float(f.min()), f_max=float(f.max()))

    e_lo, A, B = starts[:, 0], starts[:, 1], starts[:, 2]
    e_hi = ends.copy()
    while np.abs(e_hi - e_lo).max() > tol:
        mid = 0.5 * (e_lo + e_hi)
        r_mid = model.char_roots_batch(mid)
        A_mid, _ = _nearest(r_mid, A)
        B_mid, _ = _nearest(r_mid, B)
        before = np.abs(A_mid) < np.abs(B_mid)
        e_lo = np.where(before, mid, e_lo)
        e_hi = np.where(before, e_hi, mid)
        A = np.where(before, A_mid, A)
        B = np.where(before, B_mid, B)

    E_gbz = 0.5 * (e_lo + e_hi)
    r_fin = model.char_roots_batch(E_gbz)
    b1, b2 = r_fin[:, M - 1], r_fin[:, M]
    m1, m2 = np.abs(b1), np.abs(b2)
    ok = (m2 - m1) <= tie_rtol * 0.5 * (m1 + m2)
    b1, b2, E_gbz = b1[ok], b2[ok], E_gbz[ok]
    if len(E_gbz) == 0:
        raise EmptyGbzError("all GBZ crossings failed the modulus-tie check",
                            f_min=float(f.min()), f_max=float(f.max()))
    pair = np.stack([b1, b2], axis=1)
    order = np.argsort(np.mod(np.angle(pair), 2 * np.pi), axis=1, kind="stable")
    pair = np.take_along_axis(pair, order, axis=1)
    return GbzSet(beta=pair.ravel(), E=np.repeat(E_gbz, 2), f_min=float(f.min()), f_max=float(f.max()))


# SIBC classification and threshold ---------------------------------------------


class Region(str, Enum):
    ON_PBC_LOOP = "on_pbc_loop"
    SKIN_NEGATIVE = "skin_negative"
    INTERIOR_POSITIVE = "interior_positive"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class SibcClass:
    region: Region
    W: int | None

    @property
    def multiplicity(self) -> int:
        return -self.W if self.region is Region.SKIN_NEGATIVE else 0


def sibc_classify(model, E: complex) -> SibcClass:
    try:
        W = winding_roots(model, E)
    except WindingUndefinedError:
        return SibcClass(Region.ON_PBC_LOOP, None)
    if W < 0:
        return SibcClass(Region.SKIN_NEGATIVE, W)
    if W > 0:
        return SibcClass(Region.INTERIOR_POSITIVE, W)
    return SibcClass(Region.EXTERIOR, 0)


@dataclass(frozen=True)
class ThresholdReport:
    E_m1: float
    E_m2: float | None
    E_m: float
    bloch_points_present: bool
    gbz_min_modulus: float = float("nan")
    n_gbz_points: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "E_m1": self.E_m1,
            "E_m2": self.E_m2,
            "E_m": self.E_m,
            "bloch_points_present": self.bloch_points_present,
            "gbz_min_modulus": self.gbz_min_modulus,
            "n_gbz_points": self.n_gbz_points,
        }


def _refine_top(model, gbz: GbzSet, spacing: float, tol: float, levels: int) -> float:
    """Zoom onto the highest GBZ energy; the maximum can sit at an arc end the coarse grid misses."""
    best = float(gbz.E.imag.max())
    for _ in range(levels):
        E_top = gbz.E[np.argmax(gbz.E.imag)]
        half = 2.0 * spacing
        box = (E_top.real - half, E_top.real + half, E_top.imag - half, E_top.imag + half)
        try:
            gbz = obc_gbz_scan(model, Grid(box, 40), tol=tol)
        except EmptyGbzError:
            break
        best = max(best, float(gbz.E.imag.max()))
        spacing = 2 * half / 40
    return best


def compute_threshold(model, gbz: GbzSet, grid: Grid, bloch_tol: float = 1e-6,
                      refine_levels: int = 3, tol: float = 1e-8, threads: int = 1) -> ThresholdReport:
    """``E_m1`` from the GBZ, ``E_m2`` from the positive-winding interior when Bloch points exist."""
    if len(gbz) == 0:
        raise EmptyGbzError("threshold needs a non-empty GBZ")
    E_m1 = _refine_top(model, gbz, grid.spacing, tol, refine_levels) if refine_levels else float(gbz.E.imag.max())
    min_mod = float(np.abs(gbz.beta).min())
    bloch = min_mod <= 1.0 + bloch_tol
    E_m2 = None
    if bloch:
        nodes = grid.nodes()
        res = _rows_parallel(lambda e: np.stack(winding_roots_batch(model, e), axis=-1), nodes, threads)
        pos = (res[..., 0] > 0) & ~res[..., 1].astype(bool)
        if np.any(pos):
            E_m2 = float(nodes[pos].imag.max())
    E_m = E_m1 if E_m2 is None else max(E_m1, E_m2)
    return ThresholdReport(E_m1=E_m1, E_m2=E_m2, E_m=E_m, bloch_points_present=bloch,
                           gbz_min_modulus=min_mod, n_gbz_points=len(gbz))


def threshold_for(model, resolution: int = 400, tol: float = 1e-8, threads: int = 1) -> ThresholdReport:
    """Convenience: default grid, GBZ scan and threshold in one call."""
    grid = default_grid(model, resolution)
    gbz = obc_gbz_scan(model, grid, tol=tol, threads=threads)
    return compute_threshold(model, gbz, grid, tol=tol, threads=threads)


# Theorem ----------------------------------------------------------------------


class Healing(str, Enum):
    SELF_HEALING = "self_healing"
    NOT_SELF_HEALING = "not_self_healing"
    NOT_A_SKIN_MODE = "not_a_skin_mode"


@dataclass(frozen=True)
class HealingPrediction:
    verdict: Healing
    W: int | None
    margin: float | None
    indeterminate: bool = False

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "W": self.W, "margin": self.margin,
                "indeterminate": self.indeterminate}


def predict_self_healing(model, E0: complex, threshold: ThresholdReport, tol: float = 1e-4) -> HealingPrediction:
    """A skin mode (``W(E0) < 0``) heals iff ``Im(E0) > E_m``; within ``tol`` of equality it is indeterminate."""
    cls = sibc_classify(model, E0)
    if cls.region is not Region.SKIN_NEGATIVE:
        return HealingPrediction(Healing.NOT_A_SKIN_MODE, cls.W, None)
    margin = float(np.imag(E0)) - threshold.E_m
    verdict = Healing.SELF_HEALING if margin > 0 else Healing.NOT_SELF_HEALING
    return HealingPrediction(verdict, cls.W, margin, indeterminate=abs(margin) < tol)
