"""Command-line pipeline: simulate, reconstruct, analyze, spatial-scan.

Settings come from a flat ``key = value`` config file (``--config``) and are
overridden by command-line flags. Exit codes: 0 success, 1 invalid input or
usage, 2 failure while running.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import (
    ClippingError,
    DomainError,
    GridError,
    InputFormatError,
    TomographyError,
    TruncationError,
)
from .fock import GridSpec, fidelity, pad_to_common, parity_wigner_origin, wigner

log = logging.getLogger("cvtomo")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
METHODS = ("radon", "pattern", "maxlik")
_VALIDATION = (DomainError, GridError, TruncationError, InputFormatError, ClippingError, FileNotFoundError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cvtomo", description="Homodyne tomography simulation and reconstruction.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", type=Path, help="flat key = value settings file")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra setting")
        sp.add_argument("-v", "--verbose", action="store_true")

    sim = sub.add_parser("simulate", help="draw homodyne samples from a reference state")
    common(sim)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--eta", type=float)
    sim.add_argument("--nmax", type=int)
    sim.add_argument("--samples", type=int, dest="n_samples")
    sim.add_argument("--state", help="state kind, e.g. odd_cat")

    rec = sub.add_parser("reconstruct", help="estimate a state from a samples file")
    common(rec)
    rec.add_argument("--input", type=Path)
    rec.add_argument("--method", choices=METHODS)
    rec.add_argument("--eta", type=float)
    rec.add_argument("--kc", type=float)
    rec.add_argument("--nmax", type=int)
    rec.add_argument("--epsilon", type=float)
    rec.add_argument("--seed", type=int, help="base seed of bootstrap runs")

    ana = sub.add_parser("analyze", help="report on a reconstructed state or Wigner grid")
    common(ana)
    ana.add_argument("--input", type=Path)
    ana.add_argument("--truth", type=Path, help="samples sidecar JSON holding the true state")

    spa = sub.add_parser("spatial-scan", help="parity Wigner scan of a transverse mode")
    common(spa)
    spa.add_argument("--input", type=Path, help="mode CSV (x,re,im)")
    return p


def _settings(args) -> dict[str, str]:
    cfg: dict[str, str] = {}
    if args.config is not None:
        cfg.update(io.parse_config(args.config))
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        cfg[k.strip()] = v.strip()
    flag_map = {
        "seed": "seed", "eta": "eta", "kc": "k_c", "nmax": "n_max", "epsilon": "epsilon",
        "method": "method", "input": "input", "truth": "truth", "out": "out",
        "n_samples": "n_samples", "state": "state.kind",
    }
    for attr, key in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = str(val)
    return cfg


def _get(cfg, key, cast, default=None, required=False):
    if key not in cfg or cfg[key] == "":
        if required:
            raise DomainError(f"missing setting {key!r}")
        return default
    try:
        return cast(cfg[key])
    except ValueError:
        raise DomainError(f"setting {key}={cfg[key]!r} is not a valid {cast.__name__}") from None


def _strict_int(text: str) -> int:
    val = float(text)
    if val != int(val):
        raise ValueError(text)
    return int(val)


def _out_dir(cfg) -> Path:
    out = Path(cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(msg: str) -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def run_simulate(cfg: dict[str, str]) -> int:
    from .sampler import AcquisitionPlan, detected_state, sample
    from .states import StateSpec, build

    state_keys = {k[len("state."):]: v for k, v in cfg.items() if k.startswith("state.")}
    if "kind" not in state_keys:
        raise DomainError("missing setting 'state.kind'")
    if "n_max" in cfg and "n_max" not in state_keys:
        state_keys["n_max"] = cfg["n_max"]
    spec = StateSpec.from_flat(state_keys)
    rho = build(spec)
    phases = tuple(float(v) for v in cfg.get("phases", "").split(",") if v.strip())
    plan = AcquisitionPlan(
        n_samples=_get(cfg, "n_samples", _strict_int, required=True),
        seed=_get(cfg, "seed", _strict_int, 0),
        phase_schedule=cfg.get("phase_schedule", "uniform_random"),
        n_phases=_get(cfg, "n_phases", _strict_int, 12),
        phases=phases,
        eta=_get(cfg, "eta", float, 1.0),
        snr=_get(cfg, "snr", float),
        xi=_get(cfg, "xi", float, 1.0),
    )
    data = sample(rho, plan)
    out = _out_dir(cfg)
    name = cfg.get("samples_name", "samples.csv")
    meta = {
        "truth": spec.to_dict(),
        "truth_rho": io.density_matrix_to_dict(rho),
        "detected_rho": io.density_matrix_to_dict(detected_state(rho, plan)),
        "seed": plan.seed,
    }
    side = io.write_samples(out / name, data, meta)
    _say(f"wrote {len(data)} samples to {out / name}")
    _say(f"wrote metadata to {side}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------


def _grid_from(cfg) -> GridSpec:
    half = _get(cfg, "grid_half_width", float, 4.0)
    n = _get(cfg, "grid_points", _strict_int, 81)
    return GridSpec.square(half, n)


def run_reconstruct(cfg: dict[str, str]) -> int:
    from .maxlik import MaxlikConfig, bootstrap_errors, iterate
    from .pattern import estimate_density_matrix
    from .radon import RadonConfig, reconstruct

    method = cfg.get("method", "maxlik")
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    src = _get(cfg, "input", Path, required=True)
    # validate all method settings before reading data
    grid = _grid_from(cfg)
    n_max = _get(cfg, "n_max", _strict_int, 10)
    eta = _get(cfg, "eta", float, 1.0)
    if method == "radon":
        rcfg = RadonConfig(
            k_c=_get(cfg, "k_c", float, 4.0), grid=grid, binning=cfg.get("binning", "direct_sum")
        )
    elif method == "maxlik":
        mcfg = MaxlikConfig(
            n_max=n_max,
            max_iters=_get(cfg, "max_iters", _strict_int, 2000),
            epsilon=_get(cfg, "epsilon", float, 1.0),
            stop_tol=_get(cfg, "stop_tol", float, 1e-9),
            eta=eta,
            bias_correction=cfg.get("bias_correction", "false").lower() in ("1", "true", "yes"),
        )
        n_boot = _get(cfg, "bootstrap", _strict_int, 0)
    data = io.read_samples(src)
    out = _out_dir(cfg)
    side = io.sidecar_path(src)
    if side.exists() and side.resolve() != (out / "truth.json").resolve():
        shutil.copyfile(side, out / "truth.json")

    if method == "radon":
        w = reconstruct(data, rcfg)
        io.write_wigner(out / "wigner.csv", w)
        _say(f"wrote Wigner grid to {out / 'wigner.csv'}")
        return EXIT_OK

    if method == "pattern":
        est = estimate_density_matrix(data, n_max)
        io.write_density_matrix(out / "rho.json", est.rho, est.se, {"method": "pattern", "n_samples": est.n_samples})
        io.write_wigner(out / "wigner.csv", wigner(est.rho, grid))
        _say(f"wrote density matrix to {out / 'rho.json'}")
        return EXIT_OK

    res = iterate(None, data, mcfg)
    se = None
    extra = {
        "method": "maxlik",
        "iterations": res.iterations,
        "converged": res.converged,
        "tail_population": float(io.fmt(res.tail_population)),
        "rejected_steps": res.rejected_steps,
        "floor_hits": res.floor_hits,
    }
    if n_boot:
        from .sampler import AcquisitionPlan

        plan = AcquisitionPlan(n_samples=len(data), seed=0, eta=eta)
        boot_seed = _get(cfg, "seed", _strict_int, 0)
        spread = bootstrap_errors(res.rho, plan, n_boot, boot_seed, mcfg)
        se = spread
        extra["bootstrap"] = {"K": n_boot, "base_seed": boot_seed}
    io.write_density_matrix(out / "rho.json", res.rho, se, extra)
    io.write_trace(
        out / "likelihood.csv",
        [(i, ll, r) for i, (ll, r) in enumerate(zip(res.log_likelihood, res.residual))],
    )
    io.write_wigner(out / "wigner.csv", wigner(res.rho, grid))
    _say(f"maxlik: {res.iterations} iterations, converged={res.converged}, "
         f"tail population {io.fmt(res.tail_population)}")
    _say(f"wrote density matrix to {out / 'rho.json'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def _truth_file(cfg, src: Path) -> Path | None:
    if cfg.get("truth"):
        p = Path(cfg["truth"])
        if not p.exists():
            raise FileNotFoundError(f"truth file {p} not found")
        return p
    cand = src.parent / "truth.json"
    return cand if cand.exists() else None


def run_analyze(cfg: dict[str, str]) -> int:
    src = _get(cfg, "input", Path, required=True)
    if not src.exists():
        raise FileNotFoundError(f"input {src} not found")
    report: dict = {"input": str(src), "notices": []}
    if src.suffix == ".csv":
        w = io.read_wigner(src)
        report["kind"] = "wigner_grid"
        report["w00"] = float(io.fmt(w.at(0.0, 0.0)))
        report["w_min"] = float(io.fmt(w.values.min()))
        report["riemann_sum"] = float(io.fmt(w.riemann_sum()))
        report["negative"] = bool(w.values.min() < 0.0)
        report["w00_negative"] = bool(report["w00"] < 0.0)
        report["notices"].append("fidelity needs a density matrix; omitted for a Wigner grid")
    else:
        rho, _ = io.read_density_matrix(src)
        diag = rho.diagonal()
        n = np.arange(diag.size)
        w00 = parity_wigner_origin(rho)
        report["kind"] = "density_matrix"
        report["photon_number"] = [float(io.fmt(v)) for v in diag]
        report["mean_photon_number"] = float(io.fmt(float(n @ diag)))
        report["w00"] = float(io.fmt(w00))
        report["w00_negative"] = bool(w00 < 0.0)
        report["negative"] = bool(w00 < 0.0)
        truth_path = _truth_file(cfg, src)
        if truth_path is None:
            report["notices"].append("no truth sidecar found; fidelity omitted")
        else:
            meta = io.read_json(truth_path)
            for key, label in (("truth_rho", "fidelity"), ("detected_rho", "fidelity_detected")):
                if key in meta:
                    t, _ = io.density_matrix_from_dict(meta[key])
                    a, b = pad_to_common(rho, t)
                    report[label] = float(io.fmt(fidelity(a, b)))
            if "fidelity" not in report:
                report["notices"].append("truth sidecar holds no state; fidelity omitted")
    out = _out_dir(cfg)
    io.write_json(out / "report.json", report)
    for k in sorted(report):
        if k != "notices":
            _say(f"{k}: {report[k]}")
    for note in report["notices"]:
        _say(f"notice: {note}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# spatial-scan
# ---------------------------------------------------------------------------


def run_spatial_scan(cfg: dict[str, str]) -> int:
    from .spatial import SpatialMode, ensemble_correlation, propagate, wigner_scan

    n = _get(cfg, "n_points", _strict_int, 401)
    pitch = _get(cfg, "pitch", float, 0.05)
    k0 = _get(cfg, "k0", float, 1.0)
    sigma = _get(cfg, "sigma", float, 1.0)
    kind = cfg.get("mode", "gaussian")
    x_axis = np.linspace(_get(cfg, "x_min", float, -3.0), _get(cfg, "x_max", float, 3.0), _get(cfg, "nx", _strict_int, 61))
    k_axis = np.linspace(_get(cfg, "k_min", float, -3.0), _get(cfg, "k_max", float, 3.0), _get(cfg, "nk", _strict_int, 61))
    z = _get(cfg, "z", float, 0.0)
    if cfg.get("input"):
        state = io.read_mode(cfg["input"], k0=_get(cfg, "k0", float))
    elif kind == "gaussian":
        state = SpatialMode.gaussian(n, pitch, sigma, _get(cfg, "x0", float, 0.0), _get(cfg, "kx0", float, 0.0), k0)
    elif kind == "two_peak":
        sep = _get(cfg, "separation", float, 4.0)
        phase = _get(cfg, "relative_phase", float, 0.0)
        left = SpatialMode.gaussian(n, pitch, sigma, -sep / 2, 0.0, k0)
        right = SpatialMode.gaussian(n, pitch, sigma, sep / 2, 0.0, k0)
        if cfg.get("mixture", "coherent") == "incoherent":
            state = ensemble_correlation([(0.5, left), (0.5, right)])
        else:
            state = SpatialMode(left.field + np.exp(1j * phase) * right.field, pitch, k0).normalized()
    else:
        raise DomainError(f"unknown mode {kind!r}; expected gaussian or two_peak")
    if z != 0.0:
        if not isinstance(state, SpatialMode):
            raise DomainError("propagation applies to pure modes only")
        state = propagate(state, z)
    w = wigner_scan(state, x_axis, k_axis)
    out = _out_dir(cfg)
    io.write_wigner(out / "wigner.csv", w, header=("x", "kx", "w"))
    if isinstance(state, SpatialMode):
        io.write_mode(out / "mode.csv", state)
    _say(f"wrote parity scan to {out / 'wigner.csv'}")
    return EXIT_OK


RUNNERS = {
    "simulate": run_simulate,
    "reconstruct": run_reconstruct,
    "analyze": run_analyze,
    "spatial-scan": run_spatial_scan,
}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        cfg = _settings(args)
        return RUNNERS[args.command](cfg)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except _VALIDATION as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TomographyError, Exception) as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
