"""Command-line front end: ``krylov-mqm {spectrum,lanczos,complexity,radius,sweep}``.

Every command writes into ``--out`` (default ``.``) and always leaves a
``manifest.json`` there, also when the run fails.  Exit codes: 0 success,
1 bad input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .convergence import NoPeakError, convergence_report, first_peak
from .evolution import DEFAULT_POINTS, evolve, write_complexity_csv, write_phi_csv
from .lanczos import (NotPositiveDefiniteError, branch_fits, lanczos_coefficients,
                      linear_fit, read_lanczos_table, write_lanczos_table)
from .models import (MQMQuarticSpec, OscillatorChainSpec, mqm_free_spectrum,
                     mqm_quartic_spectrum, mqm_quartic_thermal, oscillator_ground,
                     oscillator_thermal)
from .spectral import PrecisionError, SpectralMeasure, thermalize, write_table
from .special import quartic_params

MODELS = ("oscillators", "mqm-free", "mqm-quartic")
CSV_HEADER = "# krylov-mqm {name} csv v1"


class UserError(Exception):
    pass


@dataclass
class RunConfig:
    model: str | None = None
    g: float | None = None
    beta: float | None = None
    J: int | None = None
    j_max: int = 64
    n_power: int = 2
    box_L: float = math.pi / 2
    series_tol: float = 1e-17
    precision_bits: int | None = None
    t_max: float | None = None
    dt: float | None = None
    method: str = "eig"
    coefficients: str | None = None
    write_phi: bool = False
    output_dir: str = "."
    grid_g: list | None = None
    grid_beta: list | None = None
    grid_J: list | None = None
    workers: int = 1

    def validate(self) -> "RunConfig":
        if self.model is not None and self.model not in MODELS:
            raise UserError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.beta is not None and not self.beta > 0:
            raise UserError("beta must be > 0 (omit it for the ground state)")
        if self.model == "oscillators" and self.J is None:
            raise UserError("model oscillators needs J")
        if self.model == "mqm-quartic" and self.g is None and not self.grid_g:
            raise UserError("model mqm-quartic needs g")
        if self.method not in ("eig", "rk4"):
            raise UserError("method must be eig or rk4")
        for name in ("t_max", "dt"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise UserError(f"{name} must be > 0")
        if self.precision_bits is not None and self.precision_bits < 53:
            raise UserError("precision_bits must be at least 53")
        return self


CONFIG_KEYS = {f.name for f in fields(RunConfig)}
_ALIASES = {"jmax": "j_max", "n": "n_power", "tmax": "t_max", "out": "output_dir",
            "box-L": "box_L", "boxL": "box_L", "precision-bits": "precision_bits"}


def load_config(path: str | Path) -> dict:
    """Flat mapping from a YAML (or JSON, a YAML subset) file; unknown keys are rejected."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise UserError(f"cannot read config {path}: {exc}") from exc
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise UserError(f"config {path} must be a flat key: value mapping")
    out = {}
    for key, value in raw.items():
        key = _ALIASES.get(key, key)
        if key not in CONFIG_KEYS:
            raise UserError(f"unknown config key {key!r}")
        if isinstance(value, dict):
            raise UserError(f"config key {key!r}: nested mappings are not allowed")
        out[key] = value
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values = load_config(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            values[key] = v
    try:
        return RunConfig(**values).validate()
    except TypeError as exc:
        raise UserError(str(exc)) from exc


# -- pipeline pieces ---------------------------------------------------------

def build_measure(cfg: RunConfig) -> SpectralMeasure:
    if cfg.model is None:
        raise UserError("--model is required")
    try:
        if cfg.model == "oscillators":
            spec = OscillatorChainSpec(int(cfg.J), float(cfg.box_L))
            return oscillator_ground(spec) if cfg.beta is None else oscillator_thermal(spec, cfg.beta)
        if cfg.model == "mqm-free":
            m = mqm_free_spectrum(int(cfg.n_power))
            return m if cfg.beta is None else thermalize(m, cfg.beta)
        spec = MQMQuarticSpec(float(cfg.g), int(cfg.j_max), float(cfg.series_tol))
    except ValueError as exc:
        if isinstance(exc, PrecisionError):
            raise
        raise UserError(str(exc)) from exc
    return mqm_quartic_spectrum(spec) if cfg.beta is None else mqm_quartic_thermal(spec, cfg.beta)


def model_period(cfg: RunConfig) -> float:
    """``4L``: the common period of all lines ``omega_j = j pi / 2L``."""
    if cfg.model == "oscillators":
        return 4 * float(cfg.box_L)
    if cfg.model == "mqm-free":
        return 4 * math.pi / (2 * math.sqrt(2.0))
    if cfg.model == "mqm-quartic":
        return 4 * quartic_params(float(cfg.g)).L
    raise UserError("no model given: pass --tmax and --dt")


def write_csv(path: Path, name: str, columns: list[str], rows) -> None:
    lines = [CSV_HEADER.format(name=name), ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str = __version__
    status: str = "running"
    K: int | None = None
    norm_drift: float | None = None
    captured_weight: float | None = None
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    error: str | None = None

    def stage(self, name: str, start: float) -> None:
        self.timings[name] = time.perf_counter() - start

    def note_measure(self, m: SpectralMeasure) -> None:
        cw = m.metadata.get("captured_weight")
        if cw is not None:
            self.captured_weight = float(cw)
        for w in m.metadata.get("warnings", []):
            if w not in self.warnings:
                self.warnings.append(w)
        if "warning" in m.metadata:
            self.warnings.append(str(m.metadata["warning"]))

    def write(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(json.dumps(_jsonable(asdict(self)), indent=2) + "\n")


# -- commands ----------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig, man: RunManifest, out: Path) -> None:
    t0 = time.perf_counter()
    m = build_measure(cfg)
    man.stage("spectrum", t0)
    man.note_measure(m)
    write_table(m, out / "spectrum.txt")
    man.results["lines"] = len(m)


def _lanczos(cfg: RunConfig, man: RunManifest):
    t0 = time.perf_counter()
    m = build_measure(cfg)
    man.stage("spectrum", t0)
    man.note_measure(m)
    t0 = time.perf_counter()
    data = lanczos_coefficients(m, precision_bits=cfg.precision_bits)
    man.stage("lanczos", t0)
    man.K = data.K
    man.results["precision_bits"] = data.metadata.get("precision_bits")
    return m, data


def _fit_summary(data) -> dict:
    b = np.asarray(data.b)
    n_hi = max(2, int(0.8 * b.size))
    res = {}
    if b.size >= 3:
        f = linear_fit(np.arange(1, n_hi + 1), b[:n_hi])
        res.update(b_slope=f.slope, b_intercept=f.intercept, b_r2=f.r2)
        fa = linear_fit(np.arange(n_hi), np.asarray(data.a)[:n_hi])
        res.update(a_slope=fa.slope, a_r2=fa.r2)
    if b.size >= 6:
        even, odd = branch_fits(b, 1, n_hi)
        res.update(b_even_slope=even.slope, b_even_r2=even.r2,
                   b_odd_slope=odd.slope, b_odd_r2=odd.r2)
    return res


def cmd_lanczos(cfg: RunConfig, man: RunManifest, out: Path) -> None:
    m, data = _lanczos(cfg, man)
    write_lanczos_table(data, out / "lanczos.csv",
                        header={"model": cfg.model, "inner_product": str(m.inner_product)})
    man.results.update(_fit_summary(data))


def _evolve(cfg: RunConfig, man: RunManifest, data):
    period = model_period(cfg) if (cfg.t_max is None or cfg.dt is None) else None
    t_max = cfg.t_max if cfg.t_max is not None else period
    dt = cfg.dt if cfg.dt is not None else period / DEFAULT_POINTS
    t0 = time.perf_counter()
    try:
        evo = evolve(data, t_max, dt, method=cfg.method)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    man.stage("evolve", t0)
    man.norm_drift = evo.norm_drift
    man.results.update(t_max=t_max, dt=dt, c_k_max=float(evo.c_k.max()))
    try:
        man.results["t_first_peak"] = first_peak(evo.t_grid, evo.c_k)
    except NoPeakError:
        man.warnings.append("no C_K peak in range")
    return evo


def cmd_complexity(cfg: RunConfig, man: RunManifest, out: Path) -> None:
    if cfg.coefficients:
        try:
            data = read_lanczos_table(cfg.coefficients)
        except (OSError, ValueError) as exc:
            raise UserError(f"cannot read coefficient file {cfg.coefficients}: {exc}") from exc
        man.K = data.K
    else:
        _, data = _lanczos(cfg, man)
    evo = _evolve(cfg, man, data)
    write_complexity_csv(evo, out / "complexity.csv")
    if cfg.write_phi:
        write_phi_csv(evo, out / "phi.csv")


def cmd_radius(cfg: RunConfig, man: RunManifest, out: Path) -> None:
    if cfg.model != "mqm-quartic" or cfg.beta is not None:
        raise UserError("radius needs the ground-state mqm-quartic model")
    try:
        spec = MQMQuarticSpec(float(cfg.g), int(cfg.j_max), float(cfg.series_tol))
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    t0 = time.perf_counter()
    report = convergence_report(spec)
    man.stage("radius", t0)
    man.K = report.params.get("K")
    man.norm_drift = report.params.get("norm_drift")
    man.warnings.extend(report.flags)
    man.results.update(report.row())
    (out / "radius.txt").write_text(report.to_text())
    write_csv(out / "tstar_estimates.csv", "tstar-estimates", ["n", "tstar_n"],
              enumerate(report.tstar_estimates, start=1))


# -- sweep -------------------------------------------------------------------

SWEEP_COLUMNS = ["index", "model", "g", "beta", "J", "K", "b_slope", "b_r2", "a_slope",
                 "b_even_slope", "b_odd_slope", "c_k_max", "tstar", "tstar_asymptotic",
                 "t_first_peak", "ratio_peak", "status"]


def sweep_rows(cfg: RunConfig) -> list[dict]:
    axes = {"g": cfg.grid_g if cfg.grid_g is not None else [cfg.g],
            "beta": cfg.grid_beta if cfg.grid_beta is not None else [cfg.beta],
            "J": cfg.grid_J if cfg.grid_J is not None else [cfg.J]}
    for name, vals in axes.items():
        if not isinstance(vals, list):
            raise UserError(f"grid_{name} must be a list")
    if any(len(v) == 0 for v in axes.values()) or not any(
            getattr(cfg, f"grid_{k}") for k in axes):
        raise UserError("empty sweep grid: give at least one non-empty grid_g, grid_beta or grid_J")
    base = {k: v for k, v in asdict(cfg).items()
            if k not in ("grid_g", "grid_beta", "grid_J", "output_dir", "workers")}
    rows = []
    for g, beta, J in itertools.product(axes["g"], axes["beta"], axes["J"]):
        rows.append({**base, "g": g, "beta": beta, "J": J})
    return rows


def row_hash(row: dict) -> str:
    return hashlib.sha256(json.dumps(row, sort_keys=True).encode()).hexdigest()[:16]


def run_row(row: dict) -> dict:
    cfg = RunConfig(**row).validate()
    man = RunManifest("sweep-row", row)
    out = {"model": cfg.model, "g": cfg.g, "beta": cfg.beta, "J": cfg.J}
    try:
        m, data = _lanczos(cfg, man)
        out["K"] = data.K
        out.update({k: v for k, v in _fit_summary(data).items()
                    if k in ("b_slope", "b_r2", "a_slope", "b_even_slope", "b_odd_slope")})
        if data.terminated:
            evo = _evolve(cfg, man, data)
            out["c_k_max"] = float(evo.c_k.max())
        if cfg.model == "mqm-quartic" and cfg.beta is None:
            rep = convergence_report(MQMQuarticSpec(float(cfg.g), int(cfg.j_max),
                                                    float(cfg.series_tol)))
            out.update({k: rep.row()[k] for k in ("tstar", "tstar_asymptotic",
                                                     "t_first_peak", "ratio_peak")})
        out["status"] = "ok"
    except (ArithmeticError, PrecisionError, NoPeakError, UserError) as exc:
        out["status"] = f"failed: {exc}"
    return out


def cmd_sweep(cfg: RunConfig, man: RunManifest, out: Path) -> None:
    rows = sweep_rows(cfg)
    done_dir = out / "rows"
    done_dir.mkdir(parents=True, exist_ok=True)
    results: dict[int, dict] = {}
    todo = []
    for i, row in enumerate(rows):
        f = done_dir / f"{row_hash(row)}.json"
        if f.exists():
            results[i] = json.loads(f.read_text())["result"]
        else:
            todo.append(i)
    t0 = time.perf_counter()
    if todo:
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                computed = list(pool.map(run_row, [rows[i] for i in todo]))
        else:
            computed = [run_row(rows[i]) for i in todo]
        for i, res in zip(todo, computed):
            results[i] = res
            if res.get("status") == "ok":
                (done_dir / f"{row_hash(rows[i])}.json").write_text(
                    json.dumps(_jsonable({"row": rows[i], "result": res}), sort_keys=True) + "\n")
    man.stage("sweep", t0)
    man.results.update(rows=len(rows), computed=len(todo), reused=len(rows) - len(todo))
    failed = [i for i, r in results.items() if r.get("status") != "ok"]
    if failed:
        man.warnings.append(f"rows {failed} failed")
    # soft check: the ground-state complexity peak is expected to grow with g
    ground = sorted((r["g"], r["c_k_max"]) for r in results.values()
                    if r.get("model") == "mqm-quartic" and r.get("beta") is None
                    and r.get("c_k_max") is not None)
    if any(b[1] < a[1] for a, b in zip(ground, ground[1:])):
        man.warnings.append("ground-state C_K peak does not grow monotonically with g")
    write_csv(out / "sweep.csv", "sweep", SWEEP_COLUMNS,
              ([i] + [results[i].get(c) for c in SWEEP_COLUMNS[1:]] for i in range(len(rows))))


COMMANDS = {"spectrum": cmd_spectrum, "lanczos": cmd_lanczos, "complexity": cmd_complexity,
            "radius": cmd_radius, "sweep": cmd_sweep}


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file with flat key: value settings")
    common.add_argument("--model", choices=MODELS)
    common.add_argument("--g", type=float)
    common.add_argument("--beta", type=float, help="inverse temperature; omit for the ground state")
    common.add_argument("--J", type=int, help="number of oscillator modes")
    common.add_argument("--jmax", dest="j_max", type=int, help="quartic-well mode truncation")
    common.add_argument("--n", dest="n_power", type=int, help="power in Tr M^n (mqm-free)")
    common.add_argument("--box-L", dest="box_L", type=float)
    common.add_argument("--precision-bits", dest="precision_bits", type=int)
    common.add_argument("--tmax", dest="t_max", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--out", dest="output_dir")
    p = argparse.ArgumentParser(prog="krylov-mqm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="write the normalized spectral measure")
    sub.add_parser("lanczos", parents=[common], help="write Lanczos coefficients")
    c = sub.add_parser("complexity", parents=[common], help="write C_K(t)")
    c.add_argument("--coefficients", help="Lanczos table to evolve instead of a model")
    c.add_argument("--method", choices=("eig", "rk4"))
    c.add_argument("--phi", dest="write_phi", action="store_true", help="also write phi.csv")
    sub.add_parser("radius", parents=[common], help="ratio-test radius and first C_K peak")
    s = sub.add_parser("sweep", parents=[common], help="run a parameter grid")
    s.add_argument("--grid-g", dest="grid_g", type=_float_list, help="comma-separated g values")
    s.add_argument("--grid-beta", dest="grid_beta", type=_float_list)
    s.add_argument("--grid-J", dest="grid_J", type=_int_list)
    s.add_argument("--workers", type=int)
    return p


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    out = Path(getattr(args, "output_dir", None) or ".")
    man = RunManifest(args.command, {})
    code = 0
    try:
        cfg = build_config(args)
        out = Path(cfg.output_dir)
        man.config = asdict(cfg)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, man, out)
        man.status = "ok"
    except UserError as exc:
        man.status, man.error, code = "user error", str(exc), 1
    except (PrecisionError, ArithmeticError, NotPositiveDefiniteError, NoPeakError) as exc:
        man.status, man.error, code = "numerical failure", str(exc), 2
    except ValueError as exc:
        man.status, man.error, code = "user error", str(exc), 1
    except Exception:  # still leave a manifest behind
        man.status, man.error, code = "internal error", traceback.format_exc(), 2
    if man.error:
        print(f"krylov-mqm: {man.error}", file=sys.stderr)
    try:
        man.write(out)
    except OSError as exc:
        print(f"krylov-mqm: cannot write manifest: {exc}", file=sys.stderr)
        code = code or 1
    return code


if __name__ == "__main__":
    sys.exit(main())
