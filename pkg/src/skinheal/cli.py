"""Command line front end: ``skinheal <subcommand> [config] [options]``.

Every subcommand writes its artifacts into ``--out`` (default: ``$SKINHEAL_OUT``
or ``./out``).  On failure an ``error.json`` is written there instead and
the process exits nonzero.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from .config import InitialSpec, RunConfig, load_config, parse_config
from .errors import ConfigError, DomainError, SkinHealError
from .evolution import EvolutionTrace, classify_healing, evolve
from .models import build_truncated
from .skin_modes import build_skin_mode, eigen_residual
from .spectra import (compute_threshold, obc_gbz_scan, pbc_spectrum, predict_self_healing,
                      winding_roots_batch, _rows_parallel)

OUT_ENV = "SKINHEAL_OUT"
SUBCOMMANDS = ("spectrum", "gbz", "winding-map", "threshold", "skin-mode", "evolve", "heal-test")

log = logging.getLogger("skinheal")


def bundled_configs() -> list[str]:
    root = resources.files("skinheal") / "configs"
    return sorted(p.name.rsplit(".", 1)[0] for p in root.iterdir() if p.name.endswith(".yaml"))


def resolve_config(ref: str) -> RunConfig:
    """A path, or the name of a bundled config (``fig3a``, ``fig3a.config``, ``fig3a.yaml``)."""
    path = Path(ref)
    if path.is_file():
        return load_config(path)
    stem = path.name.split(".")[0]
    res = resources.files("skinheal") / "configs" / f"{stem}.yaml"
    if res.is_file():
        return parse_config(res.read_text(encoding="utf-8"))
    raise ConfigError(f"no config file or bundled config named {ref!r} (bundled: {', '.join(bundled_configs())})")


# subcommands ---------------------------------------------------------------------


def _spectrum(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    loop = pbc_spectrum(cfg.build_model(), cfg.scan.K)
    rows = [(loop.k[i], E.real, E.imag, band)
            for band in range(loop.bands) for i, E in enumerate(loop.energies[:, band])]
    return [io.write_csv(out / "pbc.csv", ("k", "ReE", "ImE", "band"), rows)]


def _gbz(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    gbz = obc_gbz_scan(cfg.build_model(), cfg.grid(), tol=cfg.scan.tol, threads=threads)
    rows = zip(gbz.beta.real, gbz.beta.imag, gbz.E.real, gbz.E.imag)
    return [io.write_csv(out / "gbz.csv", ("Rebeta", "Imbeta", "ReE", "ImE"), rows)]


def winding_map(model, grid, threads: int = 1):
    """Winding numbers on the grid nodes, row-major; points on the PBC loop are dropped."""
    nodes = grid.nodes()
    res = _rows_parallel(lambda e: np.stack(winding_roots_batch(model, e), axis=-1), nodes, threads)
    keep = ~res[..., 1].astype(bool)
    return nodes[keep], res[..., 0][keep].astype(int)


def _winding(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    E, W = winding_map(cfg.build_model(), cfg.grid(), threads)
    return [io.write_csv(out / "winding.csv", ("ReE", "ImE", "W"), zip(E.real, E.imag, W))]


def _threshold_report(cfg: RunConfig, threads: int):
    model = cfg.build_model()
    grid = cfg.grid()
    gbz = obc_gbz_scan(model, grid, tol=cfg.scan.tol, threads=threads)
    return compute_threshold(model, gbz, grid, tol=cfg.scan.tol, threads=threads)


def _threshold(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    rep = _threshold_report(cfg, threads)
    doc = rep.to_dict() | {"grid_box": list(cfg.scan.box), "resolution": cfg.scan.resolution,
                           "tol": cfg.scan.tol}
    return [io.write_json(out / "threshold.json", doc)]


def _require_skin_initial(cfg: RunConfig):
    if cfg.initial is None or cfg.initial.type != "skin_mode":
        raise ConfigError("config.initial: this subcommand needs initial.type = skin_mode with E0")
    return cfg.initial


def _mode_files(model, mode, cfg: RunConfig, out: Path) -> list[Path]:
    H = build_truncated(model, cfg.lattice.N, "open")
    rows = [(n + 1, band, mode.amplitudes[n, band].real, mode.amplitudes[n, band].imag)
            for n in range(mode.N) for band in range(mode.bands)]
    meta = {
        "E0": mode.E0, "W": mode.W, "which": cfg.initial.which,
        "roots": [complex(b) for b in mode.roots_used],
        "coefficients": [complex(c) for c in mode.coefficients],
        "min_root_modulus": mode.min_root_modulus,
        "residual": eigen_residual(H, mode),
        "N": mode.N, "bands": mode.bands, "normalization": mode.normalization,
    }
    return [io.write_csv(out / "mode.csv", ("n", "band", "Repsi", "Impsi"), rows),
            io.write_json(out / "mode.json", meta)]


def _skin_mode(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    ini = _require_skin_initial(cfg)
    model = cfg.build_model()
    mode = build_skin_mode(model, ini.E0, cfg.lattice.N, ini.which)
    return _mode_files(model, mode, cfg, out)


def wavepacket(N: int, bands: int, center: int, width: float, k0: float) -> np.ndarray:
    n = np.arange(1, N + 1)
    amp = np.exp(-0.5 * ((n - center) / width) ** 2 + 1j * k0 * n)
    psi = np.repeat(amp[:, None], bands, axis=1).reshape(-1)
    return psi / np.linalg.norm(psi)


def initial_state(cfg: RunConfig, model):
    ini = cfg.initial
    if ini is None:
        raise ConfigError("config.initial: required for time evolution")
    if ini.type == "skin_mode":
        return build_skin_mode(model, ini.E0, cfg.lattice.N, ini.which)
    return wavepacket(cfg.lattice.N, model.bands, ini.center, ini.width, ini.k0)


def _trace_files(trace: EvolutionTrace, out: Path) -> list[Path]:
    rows = zip(trace.times, trace.norm_sq_log, trace.eps, trace.xi_norm_log, trace.edge_guard)
    files = [io.write_csv(out / "trace.csv", ("t", "norm_sq_log", "eps", "xi_norm_log", "edge_guard"), rows)]
    snap_rows = []
    for t in sorted(trace.snapshots):
        psi = trace.snapshots[t]["psi"]
        for n in range(psi.shape[0]):
            for band in range(psi.shape[1]):
                snap_rows.append((t, n + 1, band, psi[n, band].real, psi[n, band].imag))
    files.append(io.write_csv(out / "snapshots.csv", ("t", "n", "band", "Repsi", "Impsi"), snap_rows))
    return files


def _evolve(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    model = cfg.build_model()
    trace = evolve(model, initial_state(cfg, model), cfg.potential_spec(), cfg.evolve_params())
    files = _trace_files(trace, out)
    summary = {"reference": trace.reference, "boundary": trace.boundary, "run_valid": trace.valid,
               "first_breach_time": trace.first_breach_time, "eps_max": float(trace.eps.max()),
               "eps_end": float(trace.eps[-1])}
    files.append(io.write_json(out / "evolve.json", summary))
    return files


def heal_test(cfg: RunConfig, threads: int = 1) -> tuple[dict, EvolutionTrace | None]:
    """Theory versus simulation for the configured skin mode."""
    ini = _require_skin_initial(cfg)
    model = cfg.build_model()
    rep = _threshold_report(cfg, threads)
    pred = predict_self_healing(model, ini.E0, rep)
    verdict = {"E0": ini.E0, "W": pred.W, "E_m1": rep.E_m1, "E_m2": rep.E_m2, "E_m": rep.E_m,
               "predicted": pred.verdict.value, "margin": pred.margin, "indeterminate": pred.indeterminate}
    if pred.W is None or pred.W >= 0:
        verdict |= {"observed": None, "run_valid": None, "agree": None}
        return verdict, None
    mode = build_skin_mode(model, ini.E0, cfg.lattice.N, ini.which)
    trace = evolve(model, mode, cfg.potential_spec(), cfg.evolve_params())
    obs = classify_healing(trace)
    expected = "healed" if pred.verdict.value == "self_healing" else "not_healed"
    verdict |= {"observed": obs.verdict.value, "run_valid": obs.run_valid,
                "eps_end_ratio": obs.eps_end_ratio, "final_slope": obs.final_slope,
                "trivially_healed": obs.trivially_healed,
                "agree": obs.verdict.value == expected}
    return verdict, trace


def _heal_test(cfg: RunConfig, out: Path, threads: int) -> list[Path]:
    verdict, trace = heal_test(cfg, threads)
    files = [] if trace is None else _trace_files(trace, out)
    files.append(io.write_json(out / "verdict.json", verdict))
    return files


_HANDLERS = {
    "spectrum": _spectrum, "gbz": _gbz, "winding-map": _winding, "threshold": _threshold,
    "skin-mode": _skin_mode, "evolve": _evolve, "heal-test": _heal_test,
}


def run_subcommand(name: str, cfg: RunConfig, out_dir, threads: int = 1) -> list[Path]:
    if name not in _HANDLERS:
        raise DomainError(f"unknown subcommand {name!r}")
    if threads < 1:
        raise DomainError("threads must be >= 1")
    return _HANDLERS[name](cfg, Path(out_dir), threads)


# entry point ----------------------------------------------------------------------


def _complex_arg(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skinheal", description="Non-Bloch spectra, skin modes and self-healing runs.")
    p.add_argument("subcommand", choices=SUBCOMMANDS + ("list-configs",))
    p.add_argument("config_ref", nargs="?", help="config path or bundled config name")
    p.add_argument("--config", dest="config_opt", metavar="PATH")
    p.add_argument("--out", metavar="DIR", default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--t-end", type=float, default=None, dest="t_end")
    p.add_argument("--E0", type=_complex_arg, default=None, help="override initial.E0, e.g. 0.35j or -1+0.05j")
    p.add_argument("--seed", type=int, default=None, help="reserved; runs are deterministic")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.subcommand == "list-configs":
        print("\n".join(bundled_configs()))
        return 0
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    try:
        ref = args.config_opt or args.config_ref
        if ref is None:
            raise ConfigError("no config given (positional or --config)")
        cfg = resolve_config(ref).with_overrides(dt=args.dt, t_end=args.t_end)
        if args.E0 is not None:
            ini = cfg.initial if cfg.initial is not None and cfg.initial.type == "skin_mode" else InitialSpec()
            cfg = replace(cfg, initial=replace(ini, E0=args.E0))
        files = run_subcommand(args.subcommand, cfg, out, args.threads)
    except SkinHealError as exc:
        io.write_json(out / "error.json", exc.to_dict() | {"subcommand": args.subcommand})
        print(f"skinheal: {exc.kind}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    except Exception as exc:  # noqa: BLE001 - any failure must still leave error.json behind
        io.write_json(out / "error.json", {"error": "internal", "message": f"{type(exc).__name__}: {exc}",
                                           "subcommand": args.subcommand})
        print(f"skinheal: internal error: {exc}", file=sys.stderr)
        return 3
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
