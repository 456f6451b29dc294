"""Command line entry point: ``spectraltn <subcommand> [--config PATH] ...``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import verify as verify_mod
from .circuit import build_qfft_1d, build_qfft_2d, circuits_equal, dumps_circuit, loads_circuit
from .engine import Engine
from .models import (
    ModelSpec,
    build_model,
    correlation_experiment,
    model_terms,
    susceptibility_sweep,
)
from .oracle import bdg_solution, covariance_row, dense_spin_diagonalization, tfi_hamiltonian, wick_g1_g2
from .variational import (
    OptimizationConfig,
    bond_grow,
    merge_terms,
    minimize_energy,
    reinitialize,
    template_from_state,
    variational_template,
    write_checkpoint,
    write_energy_trace,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "correlations": {
        "kind": "FreeFermion1D",
        "dims": [1024],
        "filling": 103,
        "offset": 0.0,
        "site0": 0,
        "tolerance": 1e-8,
    },
    "tfi": {
        "n": 1024,
        "h_min": 0.2,
        "h_max": 1.8,
        "h_step": 0.02,
        "h_grid": None,
        "dh": 0.01,
        "richardson": False,
        "all_sites": False,
        "tolerance": 1e-8,
    },
    "variational": {
        "model": {"kind": "TFI", "dims": [8], "h": 1.5},
        "max_sweeps": 200,
        "tolerance": 1e-4,
        "rule": "gradient",
        "seed": 0,
        "init": "identity",
        "pairing": True,
        "bond_factor": 1,
    },
    "dump-circuit": {"dims": [8], "species": 1, "order": "xy"},
    "verify": {},
}
MODEL_KEYS = {"kind", "dims", "filling", "h", "offset"}


class ConfigError(ValueError):
    pass


def load_config(command: str, path) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS[command]))
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            user = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(user) - set(cfg))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    if isinstance(user.get("model"), dict):
        bad = sorted(set(user["model"]) - MODEL_KEYS)
        if bad:
            raise ConfigError(f"unknown model keys: {', '.join(bad)}")
    cfg.update(user)
    return cfg


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list, rows, meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(x) for x in row])


def _meta(command: str, cfg: dict, args) -> dict:
    return {
        "command": command,
        "config": json.dumps(cfg, sort_keys=True),
        "spectraltn": __version__,
        "numpy": np.__version__,
        "threads": args.threads,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }


# --- subcommands --------------------------------------------------------------------------


def cmd_correlations(cfg: dict, args) -> int:
    spec = ModelSpec(cfg["kind"], tuple(cfg["dims"]), filling=cfg["filling"], offset=cfg["offset"])
    if not spec.kind.startswith("FreeFermion"):
        raise ConfigError("correlations needs a FreeFermion1D or FreeFermion2D model")
    site0 = int(cfg["site0"])
    if not 0 <= site0 < spec.n:
        raise ConfigError("site0 out of range")
    meta = _meta("correlations", cfg, args)
    two_d = len(spec.dims) == 2
    header = (["dx", "dy"] if two_d else ["delta"]) + [
        "g1_re", "g1_im", "g2", "oracle_g1_re", "oracle_g1_im", "oracle_g2", "abs_err",
    ]
    out = args.out / "correlations.csv"
    h, state = build_model(spec)
    if spec.filling == 0:
        meta["status"] = "density is zero (nu = 0); g1 and g2 are undefined"
        offs = [(x, 0) if two_d else x for x in range(spec.dims[0])]
        rows = [(list(o) if two_d else [o]) + [None] * 7 for o in offs]
        write_csv(out, header, rows, meta)
        print(f"correlations: {meta['status']}; wrote {out}")
        return EXIT_OK
    eng = Engine(state)
    g1, g2 = correlation_experiment(spec, site0, eng)
    w1, w2 = wick_g1_g2(covariance_row(h, state.occupation.occ, site0), origin=site0)
    # oracle values indexed by site; series by offset from site0
    sites = [int(np.ravel_multi_index(tuple((np.unravel_index(site0, spec.dims)[i] + (o if not two_d else o[i])) % spec.dims[i] for i in range(len(spec.dims))), spec.dims)) for o in g1.offsets]
    o1, o2 = w1[sites], w2[sites]
    err = np.maximum(np.abs(g1.values - o1), np.abs(g2.values - o2))
    rows = []
    for i, off in enumerate(g1.offsets):
        lead = list(off) if two_d else [off]
        rows.append(lead + [g1.values[i].real, g1.values[i].imag, g2.values[i], o1[i].real, o1[i].imag, o2[i], err[i]])
    meta["mean_spacing"] = _fmt(g1.normalization)
    meta["density"] = _fmt(g1.meta["density"])
    meta["max_abs_err"] = _fmt(err.max())
    if args.stats:
        meta["stats"] = json.dumps(eng.stats.as_dict(), sort_keys=True)
    write_csv(out, header, rows, meta)
    ok = err.max() <= cfg["tolerance"]
    print(f"correlations: {len(rows)} offsets, max abs_err {err.max():.3e} -> {'PASS' if ok else 'FAIL'}; wrote {out}")
    if args.stats:
        print(f"stats: {eng.stats.as_dict()}")
    return EXIT_OK if ok else EXIT_FAIL


def _h_grid(cfg: dict) -> np.ndarray:
    if cfg["h_grid"] is not None:
        grid = np.asarray(cfg["h_grid"], dtype=float)
    else:
        lo, hi, step = float(cfg["h_min"]), float(cfg["h_max"]), float(cfg["h_step"])
        if step <= 0:
            raise ConfigError("h_step must be positive")
        grid = np.round(lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1), 12) if hi >= lo else np.array([])
    if grid.size == 0:
        raise ConfigError("empty h grid")
    return grid


def cmd_tfi(cfg: dict, args) -> int:
    n = int(cfg["n"])
    ModelSpec("TFI", (n,), h=0.0)  # validates n
    grid = _h_grid(cfg)
    if cfg["dh"] <= 0:
        raise ConfigError("dh must be positive")
    t0 = time.time()
    sweep = susceptibility_sweep(n, grid, cfg["dh"], cfg["richardson"], cfg["all_sites"], args.threads)
    oracle, source = [], "bdg" if n > 12 else "dense"
    for h in grid:
        oracle.append(dense_spin_diagonalization(n, h).z_mean if n <= 12 else bdg_solution(tfi_hamiltonian(n, h)).z_mean)
    oracle = np.array(oracle)
    err = np.abs(sweep.z - oracle)
    meta = _meta("tfi", cfg, args)
    meta["oracle"] = source
    meta["max_abs_err"] = _fmt(err.max())
    meta["seconds"] = f"{time.time() - t0:.1f}"
    rows = [(h, z, c, o, e) for h, z, c, o, e in zip(grid, sweep.z, sweep.chi, oracle, err)]
    out = args.out / "tfi.csv"
    write_csv(out, ["h", "z", "chi", "oracle_z", "abs_err"], rows, meta)
    with open(out, "a") as fh:
        fh.write(f"# peak: h={_fmt(sweep.peak)} chi={_fmt(sweep.chi.max())}\n")
    ok = err.max() <= cfg["tolerance"]
    print(f"tfi: n={n}, {len(grid)} fields, peak of chi at h={sweep.peak:.4f}, max |dZ| vs {source} oracle {err.max():.3e} -> {'PASS' if ok else 'FAIL'}")
    print(f"wrote {out}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(cfg: dict, args) -> int:
    results = verify_mod.run(args.level)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    failed = sum(not ok for _, ok, _ in results)
    print(f"{len(results) - failed}/{len(results)} checks passed (level {args.level})")
    return EXIT_FAIL if failed else EXIT_OK


def _oracle_energy(spec: ModelSpec):
    if spec.kind == "TFI":
        if spec.n <= 14:
            return dense_spin_diagonalization(spec.n, spec.h).energy
        return bdg_solution(tfi_hamiltonian(spec.n, spec.h)).ground_energy
    if spec.kind.startswith("FreeFermion"):
        h, _ = build_model(spec)
        return float(np.sort(h.dispersion())[: spec.filling].sum())
    return None


def cmd_variational(cfg: dict, args) -> int:
    m = cfg["model"]
    spec = ModelSpec(m["kind"], tuple(m["dims"]), filling=m.get("filling"), h=m.get("h", 0.0), offset=m.get("offset"))
    if spec.kind not in ("TFI", "FreeFermion1D"):
        raise ConfigError("variational supports TFI and FreeFermion1D models")
    opt = OptimizationConfig(cfg["max_sweeps"], cfg["tolerance"], cfg["rule"], cfg["seed"], cfg["init"])
    terms = model_terms(spec)
    factor = int(cfg["bond_factor"])
    _, exact = build_model(spec)
    if factor > 1:
        if spec.kind != "FreeFermion1D":
            raise ConfigError("bond_factor > 1 needs a FreeFermion1D model")
        template = reinitialize(template_from_state(bond_grow(exact, factor)), opt.init, opt.seed)
        terms = merge_terms(terms, factor)
    elif opt.init == "qfft":
        template = template_from_state(exact)
    else:
        occ = None if spec.kind == "TFI" else exact.occupation
        template = variational_template(spec.dims, occ, opt.init, opt.seed, cfg["pairing"], exact.momentum_offset)
    t0 = time.time()
    result = minimize_energy(template, terms, opt, callback=lambda s, e: print(f"sweep {s}: E = {e:.12f}") if args.stats else None)
    ref = _oracle_energy(spec)
    meta = _meta("variational", cfg, args)
    meta["seed"] = opt.seed
    meta["seconds"] = f"{time.time() - t0:.1f}"
    if ref is not None:
        meta["oracle_energy"] = _fmt(ref)
        meta["relative_error"] = _fmt(abs(result.energy - ref) / abs(ref))
    trace = args.out / "energy_trace.csv"
    write_energy_trace(trace, result, meta)
    ckpt = args.out / "checkpoint.json"
    write_checkpoint(ckpt, result)
    msg = f"variational: {result.sweeps} sweeps, E = {result.energy:.12f}"
    if ref is not None:
        msg += f", oracle {ref:.12f}, relative error {abs(result.energy - ref) / abs(ref):.3e}"
    print(msg)
    print(f"wrote {trace} and {ckpt}")
    return EXIT_OK


def cmd_dump_circuit(cfg: dict, args) -> int:
    dims = [int(d) for d in cfg["dims"]]
    if len(dims) == 1:
        c = build_qfft_1d(dims[0], int(cfg["species"]))
    elif len(dims) == 2:
        c = build_qfft_2d(dims[0], dims[1], int(cfg["species"]), cfg["order"])
    else:
        raise ConfigError("dims must have one or two entries")
    text = dumps_circuit(c)
    if not circuits_equal(loads_circuit(text), c):
        print("dump-circuit: round trip mismatch")
        return EXIT_FAIL
    out = args.out / ("circuit_" + "x".join(map(str, dims)) + ".json")
    out.write_text(text)
    print(f"dump-circuit: {c.two_body_count()} two-wire gates, round trip exact; wrote {out}")
    return EXIT_OK


COMMANDS = {
    "correlations": cmd_correlations,
    "tfi": cmd_tfi,
    "verify": cmd_verify,
    "variational": cmd_variational,
    "dump-circuit": cmd_dump_circuit,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectraltn", description="Spectral tensor network experiments and checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, default=None, help="JSON config file")
        s.add_argument("--stats", action="store_true", help="report contraction counters")
        s.add_argument("--threads", type=int, default=1, help="worker threads for independent evaluations")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--level", choices=("fast", "full"), default="fast", help="verify depth")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.command, args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
