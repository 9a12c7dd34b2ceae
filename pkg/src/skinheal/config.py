"""Run configuration: strict parsing, explicit defaults, canonical emission.

The canonical format is YAML; JSON documents are accepted unchanged (JSON is
a YAML subset) and :func:`emit_json` writes the programmatic mirror.  Complex
numbers are ``[re, im]`` pairs everywhere.  After :func:`parse_config` every
optional field holds a concrete value, so downstream code never guesses.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Union

import numpy as np
import yaml

from .errors import ConfigError, DomainError
from .evolution import Box, EvolveParams, PotentialSpec
from .laurent import LaurentSymbol
from .models import SingleBandModel, TwoChainModel
from .spectra import Grid, pbc_spectrum


@dataclass(frozen=True)
class SingleBandSpec:
    hops: tuple[tuple[int, complex], ...]

    kind = "single_band"

    def build(self) -> SingleBandModel:
        return SingleBandModel(LaurentSymbol(dict(self.hops)))

    def to_dict(self) -> dict:
        return {"type": self.kind, "hops": [[l, _cpair(v)] for l, v in self.hops]}


@dataclass(frozen=True)
class TwoChainSpec:
    t1: float
    delta_a: float
    delta_b: float
    t0: float
    V: float

    kind = "two_chain"

    def build(self) -> TwoChainModel:
        return TwoChainModel(self.t1, self.delta_a, self.delta_b, self.t0, self.V)

    def to_dict(self) -> dict:
        return {"type": self.kind, "t1": self.t1, "delta_a": self.delta_a, "delta_b": self.delta_b,
                "t0": self.t0, "V": self.V}


ModelSpec = Union[SingleBandSpec, TwoChainSpec]


@dataclass(frozen=True)
class LatticeSpec:
    N: int
    guard_band: int


@dataclass(frozen=True)
class IntegrateSpec:
    dt: float = 1e-3
    t_end: float = 20.0
    snapshot_times: tuple[float, ...] = ()
    record_every: int = 10
    boundary: str = "driven"


@dataclass(frozen=True)
class InitialSpec:
    """``skin_mode`` at ``E0`` (``which`` picks one of several), or a Gaussian ``wavepacket``."""

    type: str = "skin_mode"
    E0: complex = 0j
    which: int = 0
    center: int = 0
    width: float = 0.0
    k0: float = 0.0

    def to_dict(self) -> dict:
        if self.type == "skin_mode":
            return {"type": self.type, "E0": _cpair(self.E0), "which": self.which}
        return {"type": self.type, "center": self.center, "width": self.width, "k0": self.k0}


@dataclass(frozen=True)
class ScanSpec:
    box: tuple[float, float, float, float]
    resolution: int = 400
    tol: float = 1e-8
    K: int = 1024


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    lattice: LatticeSpec
    integrate: IntegrateSpec
    initial: InitialSpec | None
    potential: tuple[Box, ...]
    scan: ScanSpec
    name: str = ""

    def build_model(self):
        return self.model.build()

    def potential_spec(self) -> PotentialSpec:
        return PotentialSpec(self.potential)

    def grid(self) -> Grid:
        return Grid(self.scan.box, self.scan.resolution)

    def evolve_params(self) -> EvolveParams:
        ig = self.integrate
        return EvolveParams(N=self.lattice.N, dt=ig.dt, t_end=ig.t_end, snapshot_times=ig.snapshot_times,
                            record_every=ig.record_every, guard_band=self.lattice.guard_band,
                            boundary=ig.boundary)

    def with_overrides(self, dt: float | None = None, t_end: float | None = None) -> "RunConfig":
        ig = self.integrate
        ig = replace(ig, dt=ig.dt if dt is None else float(dt), t_end=ig.t_end if t_end is None else float(t_end))
        return replace(self, integrate=ig)

    def to_dict(self) -> dict:
        ig = self.integrate
        return {
            "name": self.name,
            "model": self.model.to_dict(),
            "lattice": {"N": self.lattice.N, "guard_band": self.lattice.guard_band},
            "integrate": {"dt": ig.dt, "t_end": ig.t_end, "snapshot_times": list(ig.snapshot_times),
                          "record_every": ig.record_every, "boundary": ig.boundary},
            "initial": None if self.initial is None else self.initial.to_dict(),
            "potential": [_box_dict(b) for b in self.potential],
            "scan": {"box": list(self.scan.box), "resolution": self.scan.resolution,
                     "tol": self.scan.tol, "K": self.scan.K},
        }


# helpers ----------------------------------------------------------------------------


def _cpair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _box_dict(b: Box) -> dict:
    return {"n_min": b.n_min, "n_max": b.n_max,
            "band_mask": None if b.band_mask is None else list(b.band_mask),
            "t_on": b.t_on, "t_off": b.t_off, "value": _cpair(b.value)}


class _Reader:
    """Walks a nested mapping, tracking the field path for error messages."""

    def __init__(self, data: Any, path: str):
        self.data = data
        self.path = path

    def mapping(self, allowed: set[str]) -> dict:
        if self.data is None:
            self.data = {}
        if not isinstance(self.data, dict):
            raise ConfigError(f"{self.path}: expected a mapping")
        unknown = sorted(set(map(str, self.data)) - allowed)
        if unknown:
            raise ConfigError(f"{self.path}: unknown key(s) {unknown}")
        return self.data

    def child(self, key: str) -> "_Reader":
        return _Reader(self.data.get(key) if isinstance(self.data, dict) else None, f"{self.path}.{key}")


def _number(value, path: str, kind=float, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
        if not np.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{path}: must be positive")
    if nonneg and value < 0:
        raise ConfigError(f"{path}: must be non-negative")
    return value


def _complex(value, path: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(_number(value, path), 0.0)
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{path}: complex numbers are written [re, im]")
    return complex(_number(value[0], path + "[0]"), _number(value[1], path + "[1]"))


def _get(d: dict, key: str, default, path: str, conv):
    if key not in d or d[key] is None:
        if default is ConfigError:
            raise ConfigError(f"{path}.{key}: required")
        return default
    return conv(d[key], f"{path}.{key}")


# sections ---------------------------------------------------------------------------


def _parse_model(rd: _Reader) -> ModelSpec:
    d = rd.mapping({"type", "hops", "t1", "delta_a", "delta_b", "t0", "V"})
    kind = d.get("type")
    if kind == "single_band":
        rd.mapping({"type", "hops"})
        raw = d.get("hops")
        if isinstance(raw, dict):
            raw = list(raw.items())
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{rd.path}.hops: expected a non-empty list of [l, [re, im]]")
        hops, seen = [], set()
        for i, item in enumerate(raw):
            p = f"{rd.path}.hops[{i}]"
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise ConfigError(f"{p}: expected [l, [re, im]]")
            l = _number(item[0], p + "[0]", int)
            if l in seen:
                raise ConfigError(f"{p}: duplicate offset {l}")
            seen.add(l)
            hops.append((l, _complex(item[1], p + "[1]")))
        hops.sort()
        spec = SingleBandSpec(tuple(hops))
    elif kind == "two_chain":
        rd.mapping({"type", "t1", "delta_a", "delta_b", "t0", "V"})
        vals = {k: _get(d, k, ConfigError, rd.path, _number) for k in ("t1", "delta_a", "delta_b", "t0", "V")}
        spec = TwoChainSpec(**vals)
    else:
        raise ConfigError(f"{rd.path}.type: expected 'single_band' or 'two_chain', got {kind!r}")
    try:
        model = spec.build()
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"{rd.path}: {exc}") from exc
    if kind == "single_band":
        # tightness: the declared extreme offsets must carry nonzero amplitude
        lo, hi = hops[0][0], hops[-1][0]
        if lo != -model.r or hi != model.s:
            raise ConfigError(f"{rd.path}.hops: extreme offsets must be nonzero (declared [{lo}, {hi}], "
                              f"effective [-{model.r}, {model.s}])")
    return spec


def parse_dict(data: Any) -> RunConfig:
    root = _Reader(data, "config")
    d = root.mapping({"name", "model", "lattice", "integrate", "initial", "potential", "scan"})
    if "model" not in d:
        raise ConfigError("config.model: required")
    spec = _parse_model(root.child("model"))
    model = spec.build()

    lat = root.child("lattice")
    ld = lat.mapping({"N", "guard_band"})
    N = _get(ld, "N", 300, lat.path, lambda v, p: _number(v, p, int, positive=True))
    if N <= 2 * model.reach:
        raise ConfigError(f"{lat.path}.N: need N > 2 max(r, s) = {2 * model.reach}, got {N}")
    guard = _get(ld, "guard_band", 10 * model.reach, lat.path, lambda v, p: _number(v, p, int, positive=True))
    if guard >= N:
        raise ConfigError(f"{lat.path}.guard_band: must be smaller than N")

    ig = root.child("integrate")
    gd = ig.mapping({"dt", "t_end", "snapshot_times", "record_every", "boundary"})
    dt = _get(gd, "dt", 1e-3, ig.path, lambda v, p: _number(v, p, positive=True))
    t_end = _get(gd, "t_end", 20.0, ig.path, lambda v, p: _number(v, p, positive=True))
    snaps_raw = gd.get("snapshot_times") or []
    if not isinstance(snaps_raw, list):
        raise ConfigError(f"{ig.path}.snapshot_times: expected a list")
    snaps = tuple(sorted(_number(v, f"{ig.path}.snapshot_times[{i}]", nonneg=True) for i, v in enumerate(snaps_raw)))
    if snaps and snaps[-1] > t_end:
        raise ConfigError(f"{ig.path}.snapshot_times: {snaps[-1]} exceeds t_end={t_end}")
    every = _get(gd, "record_every", 10, ig.path, lambda v, p: _number(v, p, int, positive=True))
    boundary = gd.get("boundary", "driven")
    if boundary not in ("driven", "open"):
        raise ConfigError(f"{ig.path}.boundary: expected 'driven' or 'open', got {boundary!r}")
    integrate = IntegrateSpec(dt, t_end, snaps, every, boundary)

    initial = None
    if d.get("initial") is not None:
        ini = root.child("initial")
        idd = ini.mapping({"type", "E0", "which", "center", "width", "k0"})
        kind = idd.get("type", "skin_mode")
        if kind == "skin_mode":
            ini.mapping({"type", "E0", "which"})
            E0 = _get(idd, "E0", ConfigError, ini.path, _complex)
            which = _get(idd, "which", 0, ini.path, lambda v, p: _number(v, p, int, nonneg=True))
            initial = InitialSpec("skin_mode", E0, which)
        elif kind == "wavepacket":
            ini.mapping({"type", "center", "width", "k0"})
            center = _get(idd, "center", N // 2, ini.path, lambda v, p: _number(v, p, int, positive=True))
            width = _get(idd, "width", 10.0, ini.path, lambda v, p: _number(v, p, positive=True))
            k0 = _get(idd, "k0", 0.0, ini.path, _number)
            if center > N:
                raise ConfigError(f"{ini.path}.center: outside the lattice")
            initial = InitialSpec("wavepacket", center=center, width=width, k0=k0)
        else:
            raise ConfigError(f"{ini.path}.type: expected 'skin_mode' or 'wavepacket', got {kind!r}")

    boxes = []
    pot = d.get("potential") or []
    if not isinstance(pot, list):
        raise ConfigError("config.potential: expected a list of boxes")
    for i, raw in enumerate(pot):
        br = _Reader(raw, f"config.potential[{i}]")
        bd = br.mapping({"n_min", "n_max", "band_mask", "t_on", "t_off", "value"})
        mask = bd.get("band_mask")
        if mask is not None:
            if not isinstance(mask, list) or not mask:
                raise ConfigError(f"{br.path}.band_mask: expected a non-empty list of band indices or null")
            mask = tuple(sorted({_number(m, f"{br.path}.band_mask", int, nonneg=True) for m in mask}))
            if mask[-1] >= model.bands:
                raise ConfigError(f"{br.path}.band_mask: band {mask[-1]} does not exist")
        try:
            boxes.append(Box(
                n_min=_get(bd, "n_min", ConfigError, br.path, lambda v, p: _number(v, p, int)),
                n_max=_get(bd, "n_max", ConfigError, br.path, lambda v, p: _number(v, p, int)),
                t_on=_get(bd, "t_on", ConfigError, br.path, _number),
                t_off=_get(bd, "t_off", ConfigError, br.path, _number),
                value=_get(bd, "value", ConfigError, br.path, _complex),
                band_mask=mask,
            ))
        except DomainError as exc:
            raise ConfigError(f"{br.path}: {exc}") from exc

    sc = root.child("scan")
    sd = sc.mapping({"box", "resolution", "tol", "K"})
    K = _get(sd, "K", 1024, sc.path, lambda v, p: _number(v, p, int, positive=True))
    if K < 64:
        raise ConfigError(f"{sc.path}.K: need at least 64 samples")
    box = sd.get("box")
    if box is None:
        box = pbc_spectrum(model, K).bounding_box(0.1)
    else:
        if not isinstance(box, list) or len(box) != 4:
            raise ConfigError(f"{sc.path}.box: expected [re_min, re_max, im_min, im_max]")
        box = tuple(_number(v, f"{sc.path}.box[{i}]") for i, v in enumerate(box))
        if not (box[0] < box[1] and box[2] < box[3]):
            raise ConfigError(f"{sc.path}.box: empty box")
    scan = ScanSpec(
        box=tuple(float(v) for v in box),
        resolution=_get(sd, "resolution", 400, sc.path, lambda v, p: _number(v, p, int, positive=True)),
        tol=_get(sd, "tol", 1e-8, sc.path, lambda v, p: _number(v, p, positive=True)),
        K=K,
    )
    name = d.get("name") or ""
    if not isinstance(name, str):
        raise ConfigError("config.name: expected a string")
    return RunConfig(spec, LatticeSpec(N, guard), integrate, initial, tuple(boxes), scan, name)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e-08``), as the emitter writes them."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def parse_config(text: str) -> RunConfig:
    """Parse a YAML (or JSON) document into a fully populated :class:`RunConfig`."""
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: not valid YAML/JSON ({exc})") from exc
    return parse_dict(data)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def emit_config(cfg: RunConfig) -> str:
    """Canonical YAML; ``parse_config(emit_config(c)) == c``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def emit_json(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2) + "\n"
