"""Time evolution with space-time obstacles and the self-healing diagnostics.

The wave equation ``i dpsi/dt = (H + V(t)) psi`` is integrated with classical
RK4 on an open truncation of the semi-infinite lattice.  When the initial
state is a :class:`~skinheal.skin_modes.SkinMode`, the missing sites to the
right of the truncation are supplied from the unperturbed solution
``phi0 exp(-i E0 t)`` ("driven" right boundary).  This is exact for the
semi-infinite lattice as long as the deviation has not reached the right
edge, which the edge guard monitors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import BlowUpError, DomainError
from .models import TruncatedHamiltonian, build_truncated, right_ghost_coupling
from .skin_modes import SkinMode

log = logging.getLogger(__name__)

GUARD_RTOL = 1e-8
TRIVIAL_EPS = 1e-20


# Potentials -------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """``value`` on sites ``n_min..n_max`` (inclusive) for ``t_on <= t < t_off``."""

    n_min: int
    n_max: int
    t_on: float
    t_off: float
    value: complex
    band_mask: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_min < 1 or self.n_max < self.n_min:
            raise DomainError(f"bad site range {self.n_min}..{self.n_max}")
        if not (np.isfinite(self.t_off) and self.t_off >= self.t_on):
            raise DomainError(f"bad time window [{self.t_on}, {self.t_off})")

    def active(self, t: float, left: bool = False) -> bool:
        # ``left``: limit from below, used for the end-of-step RK4 stage
        if left:
            return self.t_on < t <= self.t_off
        return self.t_on <= t < self.t_off

    def covers(self, n: int, band: int) -> bool:
        return self.n_min <= n <= self.n_max and (self.band_mask is None or band in self.band_mask)


@dataclass(frozen=True)
class PotentialSpec:
    boxes: tuple[Box, ...] = ()

    @property
    def L(self) -> int:
        return max((b.n_max for b in self.boxes), default=0)

    @property
    def T(self) -> float:
        return max((b.t_off for b in self.boxes), default=0.0)

    @property
    def max_abs(self) -> float:
        return sum(abs(b.value) for b in self.boxes)


def potential_at(spec: PotentialSpec, n: int, band: int, t: float) -> complex:
    return complex(sum(b.value for b in spec.boxes if b.active(t) and b.covers(n, band)))


class _PotentialField:
    """Diagonal of ``V(t)`` on a truncated lattice, cached per set of active boxes."""

    def __init__(self, spec: PotentialSpec, N: int, bands: int):
        self.spec = spec
        self.masks = []
        for b in spec.boxes:
            m = np.zeros((N, bands))
            hi = min(b.n_max, N)
            cols = list(range(bands)) if b.band_mask is None else [c for c in b.band_mask if c < bands]
            m[b.n_min - 1:hi, cols] = 1.0
            self.masks.append(m.reshape(-1))
        self._cache = {}

    def __call__(self, t: float, left: bool = False):
        key = tuple(i for i, b in enumerate(self.spec.boxes) if b.active(t, left))
        if not key:
            return None
        if key not in self._cache:
            self._cache[key] = sum(self.spec.boxes[i].value * self.masks[i] for i in key)
        return self._cache[key]


# Integrator -------------------------------------------------------------------


def _rk4(A, vfield, psi, t, dt, source):
    def f(tt, y, left=False):
        out = A @ y
        v = vfield(tt, left)
        if v is not None:
            out += v * y
        if source is not None:
            out += source(tt)
        return -1j * out

    k1 = f(t, psi)
    k2 = f(t + 0.5 * dt, psi + (0.5 * dt) * k1)
    k3 = f(t + 0.5 * dt, psi + (0.5 * dt) * k2)
    k4 = f(t + dt, psi + dt * k3, dt > 0)
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(H: TruncatedHamiltonian, spec: PotentialSpec, psi: np.ndarray, t: float, dt: float,
             source: Callable[[float], np.ndarray] | None = None) -> np.ndarray:
    """One classical RK4 step of ``i dpsi/dt = (H + V(t)) psi (+ source(t))``."""
    if dt * (H.norm_inf() + spec.max_abs) >= 1.0:
        raise DomainError(f"dt={dt} violates dt*(|H|_inf + max|V|) < 1")
    out = _rk4(H.matrix, _PotentialField(spec, H.N, H.bands), np.asarray(psi, dtype=complex), t, dt, source)
    if not np.all(np.isfinite(out)):
        raise BlowUpError(f"non-finite amplitudes after step at t={t}")
    return out


# Evolution ---------------------------------------------------------------------


@dataclass(frozen=True)
class EvolveParams:
    N: int = 300
    dt: float = 1e-3
    t_end: float = 20.0
    snapshot_times: tuple[float, ...] = ()
    record_every: int = 10
    guard_band: int | None = None
    boundary: str = "driven"
    renorm_log: float = 40.0


@dataclass
class EvolutionTrace:
    """Recorded diagnostics; logs are natural logs of squared norms in the true (unrescaled) scale.

    ``snapshots[t]`` holds ``psi`` and ``xi`` divided by ``|phi(t)|``, so that
    ``|xi|**2`` equals ``eps`` at that time.
    """

    times: np.ndarray
    norm_sq_log: np.ndarray
    eps: np.ndarray
    xi_norm_log: np.ndarray
    edge_guard: np.ndarray
    snapshots: dict
    E0: complex | None
    N: int
    bands: int
    guard_band: int
    T: float
    L: int
    velocity: float
    reference: str
    boundary: str
    valid: bool = True
    first_breach_time: float | None = None
    meta: dict = field(default_factory=dict)
    phi_norm_log: np.ndarray | None = None

    def snapshot(self, t: float) -> dict:
        key = min(self.snapshots, key=lambda s: abs(s - t), default=None)
        if key is None or abs(key - t) > 1e-9 + 1e-6 * abs(t):
            raise DomainError(f"no snapshot at t={t}")
        return self.snapshots[key]

    def phi_norm_sq_log(self) -> np.ndarray:
        if self.phi_norm_log is not None:
            return self.phi_norm_log
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.xi_norm_log - np.log(self.eps)

    def xi_growth_rate(self, window: tuple[float, float], prefactor_power: float = 0.0,
                       origin: float = 0.0) -> float:
        """Growth rate of ``|xi(t)|`` (half the slope of ``log |xi|**2``).

        A saddle point of the symbol contributes ``|xi| ~ (t - origin)**(-p) exp(rate t)``;
        ``prefactor_power=p`` removes the algebraic factor before fitting.
        """
        y = 0.5 * self.xi_norm_log
        if prefactor_power:
            if window[0] <= origin:
                raise DomainError("window must start after the origin of the algebraic prefactor")
            y = y + prefactor_power * np.log(np.maximum(self.times - origin, 1e-300))
        return growth_rate(self.times, y, window, log=True)


def evolve(model, psi0, spec: PotentialSpec, params: EvolveParams = EvolveParams()) -> EvolutionTrace:
    """Integrate from ``psi0`` (a :class:`SkinMode` or a state vector) and record ``eps(t)``."""
    N, dt = params.N, params.dt
    H = build_truncated(model, N, "open")
    b = model.bands
    guard = params.guard_band if params.guard_band is not None else 10 * model.reach
    if not 0 < guard < N:
        raise DomainError(f"guard band {guard} must lie in (0, {N})")
    if dt * (H.norm_inf() + spec.max_abs) >= 1.0:
        raise DomainError(f"dt={dt} violates dt*(|H|_inf + max|V|) < 1")
    vfield = _PotentialField(spec, N, b)
    A = H.matrix

    analytic = isinstance(psi0, SkinMode)
    if analytic:
        E0 = psi0.E0
        phi0 = psi0.amplitude_at(np.arange(1, N + 1)).reshape(-1)
        driven = params.boundary == "driven"
        if params.boundary not in ("driven", "open"):
            raise DomainError(f"unknown boundary {params.boundary!r}")
        src0 = None
        if driven:
            ghost = psi0.amplitude_at(np.arange(N + 1, N + model.r + 1))
            src0 = right_ghost_coupling(model, N, ghost)
        psi = phi0.copy()
        phi = None
    else:
        E0 = None
        driven = False
        psi = np.asarray(psi0, dtype=complex).reshape(-1).copy()
        if psi.shape[0] != N * b:
            raise DomainError(f"psi0 has length {psi.shape[0]}, expected {N * b}")
        phi = psi.copy()
        src0 = None
    lam = 0.0

    nsteps = int(round(params.t_end / dt))
    snap_steps = {int(round(ts / dt)): float(ts) for ts in params.snapshot_times}
    rec_t, rec_norm, rec_eps, rec_xi, rec_phi, rec_guard = [], [], [], [], [], []
    snapshots = {}
    first_breach = None
    gsl = slice((N - guard) * b, N * b)

    def reference(t):
        if analytic:
            return phi0 * np.exp(-1j * E0 * t - lam)
        return phi

    def record(step):
        nonlocal first_breach
        t = step * dt
        ref = reference(t)
        xi = psi - ref
        nphi2 = float(np.vdot(ref, ref).real)
        nxi2 = float(np.vdot(xi, xi).real)
        npsi2 = float(np.vdot(psi, psi).real)
        amax = float(np.abs(psi).max())
        if analytic:
            g = float(np.abs(xi[gsl]).max()) / amax if amax > 0 else 0.0
        else:
            g = max(float(np.abs(psi[gsl]).max()), float(np.abs(ref[gsl]).max())) / amax if amax > 0 else 0.0
        if g > GUARD_RTOL and first_breach is None:
            first_breach = t
        rec_t.append(t)
        rec_norm.append(np.log(npsi2) + 2 * lam)
        rec_eps.append(nxi2 / nphi2)
        rec_xi.append((np.log(nxi2) if nxi2 > 0 else -np.inf) + 2 * lam)
        rec_phi.append(np.log(nphi2) + 2 * lam)
        rec_guard.append(g)
        if step in snap_steps:
            s = 1.0 / np.sqrt(nphi2)
            snapshots[snap_steps[step]] = {"psi": (psi * s).reshape(N, b), "xi": (xi * s).reshape(N, b)}

    record(0)
    for step in range(nsteps):
        t = step * dt
        source = None
        if src0 is not None:
            source = lambda tt, _l=lam: src0 * np.exp(-1j * E0 * tt - _l)
        psi = _rk4(A, vfield, psi, t, dt, source)
        if phi is not None:
            phi = _rk4(A, lambda tt, left=False: None, phi, t, dt, None)
        if (step + 1) % 10 == 0 or step + 1 == nsteps:
            nrm = np.linalg.norm(psi)
            if not np.isfinite(nrm):
                raise BlowUpError(f"non-finite amplitudes at t={(step + 1) * dt:.6g} (step {step + 1})")
            if nrm > 0 and abs(np.log(nrm)) > params.renorm_log:
                psi = psi / nrm
                if phi is not None:
                    phi = phi / nrm
                lam += float(np.log(nrm))
        if (step + 1) % params.record_every == 0 or step + 1 == nsteps or (step + 1) in snap_steps:
            record(step + 1)

    if first_breach is not None:
        log.warning("edge guard breached at t=%.4g; later times are not semi-infinite dynamics", first_breach)
    return EvolutionTrace(
        times=np.array(rec_t), norm_sq_log=np.array(rec_norm), eps=np.array(rec_eps),
        xi_norm_log=np.array(rec_xi), edge_guard=np.array(rec_guard), snapshots=snapshots,
        E0=E0, N=N, bands=b, guard_band=guard, T=spec.T, L=spec.L,
        velocity=2 * model.reach * model.max_hop,
        reference="analytic" if analytic else "cointegrated",
        boundary="driven" if driven else "open",
        valid=first_breach is None, first_breach_time=first_breach, phi_norm_log=np.array(rec_phi),
    )


def epsilon(psi: np.ndarray, phi: np.ndarray) -> float:
    """Deviation ``|psi - phi|**2 / |phi|**2``."""
    xi = np.asarray(psi) - np.asarray(phi)
    return float(np.vdot(xi, xi).real / np.vdot(phi, phi).real)


# Diagnostics ---------------------------------------------------------------------


@dataclass(frozen=True)
class TailCheck:
    passed: bool
    vacuous: bool
    fitted_rate: float | None
    start_site: int
    sites: np.ndarray
    log_profile: np.ndarray
    near_rate: float | None = None

    @property
    def accelerating(self) -> bool:
        """Decay steepening with distance, the signature of a faster-than-exponential tail."""
        return self.fitted_rate is not None and self.near_rate is not None and self.fitted_rate > self.near_rate


def tail_decay_check(site_amplitudes: np.ndarray, start: int, rate_h: float,
                     floor: float | None = None) -> TailCheck:
    """Does ``|xi_n|`` for ``n >= start`` decay at least like ``exp(-rate_h n)``?

    ``site_amplitudes[n-1]`` is the amplitude on site ``n``.  Sites below
    ``floor`` carry no information.  The rate is fitted on the far half of
    the informative tail (the asymptotic end); the near half is reported for
    comparison.  With fewer than three informative sites the check passes
    vacuously.
    """
    a = np.abs(np.asarray(site_amplitudes))
    if floor is None:
        floor = 1e-12 * max(float(a.max()), 1e-300)
    n = np.arange(1, len(a) + 1)
    sel = n >= start
    informative = sel & (a > floor)
    if np.count_nonzero(informative) < 3:
        logs = np.log(a[informative]) if np.any(informative) else np.array([])
        return TailCheck(True, True, None, start, n[informative], logs)
    # informative tail ends where the profile first sinks below the floor
    last = n[informative].max()
    first_below = n[sel & (a <= floor)]
    if len(first_below):
        last = min(last, first_below.min() - 1)
    tail = (n >= start) & (n <= last)
    sites, logs = n[tail], np.log(a[tail])
    if len(sites) < 3:
        return TailCheck(True, True, None, start, sites, logs)
    half = max(3, len(sites) // 2)
    far = -float(np.polyfit(sites[-half:], logs[-half:], 1)[0])
    near = -float(np.polyfit(sites[:half], logs[:half], 1)[0])
    return TailCheck(far >= rate_h, False, far, start, sites, logs, near)


def deviation_tail_check(trace: EvolutionTrace, T: float | None = None, L: int | None = None,
                         rate_h: float = 1.0, velocity: float | None = None) -> TailCheck:
    """Check the deviation tail beyond the ballistic cone ``L + v T`` at time ``T``."""
    T = trace.T if T is None else T
    L = trace.L if L is None else L
    v = trace.velocity if velocity is None else velocity
    snap = trace.snapshot(T)
    xi = np.sqrt((np.abs(snap["xi"]) ** 2).sum(axis=1))
    amax = float(np.abs(snap["psi"]).max())
    return tail_decay_check(xi, int(np.ceil(L + v * T)), rate_h, floor=1e-12 * amax)


def growth_rate(times: Sequence[float], values: Sequence[float], window: tuple[float, float],
                log: bool = False) -> float:
    """Least-squares slope of ``log(values)`` against ``times`` inside ``window``.

    Pass ``log=True`` when ``values`` already holds logarithms.  Applied to a
    squared norm the slope is twice the rate of the norm itself.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(sel) < 10:
        raise DomainError(f"only {np.count_nonzero(sel)} samples in window {window}; need 10")
    y = v[sel] if log else np.log(v[sel])
    return float(np.polyfit(t[sel], y, 1)[0])


class Observed(str, Enum):
    HEALED = "healed"
    NOT_HEALED = "not_healed"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class HealingObservation:
    verdict: Observed
    eps_end_ratio: float
    final_slope: float | None
    trivially_healed: bool
    run_valid: bool

    def to_dict(self) -> dict:
        return {"observed": self.verdict.value, "eps_end_ratio": self.eps_end_ratio,
                "final_slope": self.final_slope, "trivially_healed": self.trivially_healed,
                "run_valid": self.run_valid}


def default_slope_window(trace: EvolutionTrace) -> tuple[float, float]:
    t_end = float(trace.times[-1])
    width = max(2.0, 0.2 * (t_end - trace.T))
    return (t_end - width, t_end)


def classify_healing(trace: EvolutionTrace, eps_floor: float = 1e-3,
                     slope_window: tuple[float, float] | None = None,
                     slope_eta: float = 0.05) -> HealingObservation:
    """Finite-time surrogate for ``eps(t) -> 0``."""
    eps = trace.eps
    eps_max = float(eps.max())
    if eps_max < TRIVIAL_EPS:
        return HealingObservation(Observed.HEALED, 0.0, None, True, trace.valid)
    ratio = float(eps[-1] / eps_max)
    window = slope_window or default_slope_window(trace)
    slope = growth_rate(trace.times, np.log(np.maximum(eps, 1e-300)), window, log=True)
    if ratio < eps_floor and slope < -slope_eta:
        verdict = Observed.HEALED
    elif slope > slope_eta or ratio > 0.3:
        verdict = Observed.NOT_HEALED
    else:
        verdict = Observed.INCONCLUSIVE
    return HealingObservation(verdict, ratio, slope, False, trace.valid)
