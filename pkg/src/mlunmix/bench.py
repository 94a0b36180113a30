"""Monte-Carlo benchmark harness.

Runs a grid of (SNR, run, method) cells: each cell generates a fresh scene,
adds calibrated noise, runs one unmixing method, and scores it against the
ground truth.  Raw per-cell results land in ``cells/`` and the aggregate
table is recomputed from those files, so nothing depends on in-process
state.  All randomness fans out from one master seed; scene and noise
streams are keyed by (snr, run) only, so every method inside a cell sees
identical data and a paired comparison is meaningful, and adding a method
or SNR point never shifts the others.
"""

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import fileio
from .core import SpectralCube
from .engine import LayerConfig, estimate_abundances
from .errors import ConfigError
from .initialization import InitMethod, vca_endmembers
from .metrics import EvalReport, evaluate_matrices
from .multilayer import MlnmfConfig, run_mlnmf
from .seeding import derive_seed
from .synth import SceneSpec, SpectralLibrary, add_noise, demo_library, generate_scene

METHODS = ("mlnmf", "slnmf", "vca_fcls")

CELL_HEADER = "method,snr_db,run,seed,status,rms_sad,rms_aad,excluded_pixels,error"
AGGREGATE_HEADER = (
    "method,snr_db,runs_ok,runs_failed,"
    "rms_sad_mean,rms_sad_std,rms_aad_mean,rms_aad_std"
)

_CONFIG_KEYS = {
    "rows", "cols", "block", "filter", "purity", "p",
    "layers", "tmax", "alpha0", "tau", "delta", "epsilon",
    "alpha_s_ratio", "stop_patience", "init",
    "snr_grid", "runs", "methods", "seed", "library", "output_dir",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one benchmark run needs.

    The ``seed`` fields inside ``scene`` and ``solver`` are ignored; per-cell
    seeds are derived from ``master_seed``.
    """

    scene: SceneSpec = field(default_factory=SceneSpec)
    solver: MlnmfConfig = field(default_factory=lambda: MlnmfConfig(p=6))
    snr_grid: tuple[float, ...] = (15.0, 20.0, 25.0, 30.0, math.inf)
    runs: int = 20
    methods: tuple[str, ...] = METHODS
    master_seed: int = 0
    library: str | None = None
    output_dir: str = "bench_out"

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not self.snr_grid:
            raise ValueError("snr_grid must be nonempty")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if self.scene.p != self.solver.p:
            raise ValueError("scene and solver endmember counts differ")


@dataclass(frozen=True)
class CellOutcome:
    method: str
    snr_db: float
    run: int
    seed: int
    report: EvalReport | None
    error: str | None


@dataclass(frozen=True)
class BenchResult:
    outcomes: tuple[CellOutcome, ...]
    output_dir: str
    aggregate_path: str

    @property
    def total(self) -> int:
        return len(self.outcomes)

    @property
    def failed(self) -> int:
        return sum(1 for o in self.outcomes if o.error is not None)


def snr_tag(snr_db: float) -> str:
    return f"{snr_db:g}"


def parse_snr(text: str) -> float:
    value = float(text)
    if math.isnan(value) or value == -math.inf:
        raise ConfigError(f"bad SNR value {text!r}")
    return value


def default_config_items() -> dict:
    """The key=value defaults a config file starts from."""
    return {
        "rows": "64", "cols": "64", "block": "8", "filter": "9",
        "purity": "0.8", "p": "6",
        "layers": "10", "tmax": "400", "alpha0": "0.1", "tau": "25",
        "delta": "25", "epsilon": "1e-4", "alpha_s_ratio": "2",
        "stop_patience": "10", "init": "vca",
        "snr_grid": "15,20,25,30,inf", "runs": "20",
        "methods": ",".join(METHODS), "seed": "0",
        "library": "", "output_dir": "bench_out",
    }


def parse_experiment_items(items: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from string key=value items."""
    merged = default_config_items()
    for key, value in items.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown experiment config key {key!r}")
        merged[key] = value
    try:
        scene = SceneSpec(
            image_size=(int(merged["rows"]), int(merged["cols"])),
            block_size=int(merged["block"]),
            filter_size=int(merged["filter"]),
            purity_threshold=float(merged["purity"]),
            p=int(merged["p"]),
        )
        layer = LayerConfig(
            alpha0=float(merged["alpha0"]),
            tau=float(merged["tau"]),
            alpha_s_ratio=float(merged["alpha_s_ratio"]),
            delta=float(merged["delta"]),
            t_max=int(merged["tmax"]),
            epsilon=float(merged["epsilon"]),
            stop_patience=int(merged["stop_patience"]),
        )
        solver = MlnmfConfig(
            p=int(merged["p"]),
            layers=int(merged["layers"]),
            layer=layer,
            init=InitMethod(merged["init"]),
        )
        return ExperimentConfig(
            scene=scene,
            solver=solver,
            snr_grid=tuple(parse_snr(v) for v in merged["snr_grid"].split(",") if v.strip()),
            runs=int(merged["runs"]),
            methods=tuple(m.strip() for m in merged["methods"].split(",") if m.strip()),
            master_seed=int(merged["seed"]),
            library=merged["library"] or None,
            output_dir=merged["output_dir"],
        )
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad experiment config: {exc}") from exc


def load_experiment_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a key=value config file, then apply ``overrides`` on top."""
    items = fileio.read_manifest(path)
    if overrides:
        items.update(overrides)
    return parse_experiment_items(items)


def _run_method(method: str, noisy: SpectralCube, cfg: ExperimentConfig, seed: int):
    """Dispatch one cell's solver; returns (signatures, abundances) wrappers."""
    solver = cfg.solver
    if method == "mlnmf":
        result = run_mlnmf(noisy, replace(solver, seed=seed))
        return result.A, result.S
    if method == "slnmf":
        result = run_mlnmf(noisy, replace(solver, layers=1, seed=seed))
        return result.A, result.S
    if method == "vca_fcls":
        init = vca_endmembers(noisy.data, solver.p, seed)
        fit = estimate_abundances(
            noisy.data,
            init.A0,
            delta=solver.layer.delta,
            t_max=solver.layer.t_max,
            epsilon=solver.layer.epsilon,
            stop_patience=solver.layer.stop_patience,
        )
        return fit.A, fit.S
    raise ConfigError(f"unknown method {method!r}")


def _cell_filename(method: str, snr_db: float, run: int) -> str:
    return f"{method}_snr{snr_tag(snr_db)}_run{run:03d}.csv"


def _write_cell(path, outcome: CellOutcome) -> None:
    if outcome.report is not None:
        fields = [
            outcome.method, snr_tag(outcome.snr_db), str(outcome.run),
            str(outcome.seed), "ok",
            fileio.fmt(outcome.report.rms_sad), fileio.fmt(outcome.report.rms_aad),
            str(outcome.report.excluded_pixels), "",
        ]
    else:
        message = (outcome.error or "").replace(",", ";").replace("\n", " ")
        fields = [
            outcome.method, snr_tag(outcome.snr_db), str(outcome.run),
            str(outcome.seed), "error", "", "", "", message,
        ]
    fileio.atomic_write_text(path, CELL_HEADER + "\n" + ",".join(fields) + "\n")


def read_cell(path) -> CellOutcome:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2 or lines[0] != CELL_HEADER:
        raise ConfigError(f"{path}: not a benchmark cell file")
    fields = lines[1].split(",")
    method, snr, run, seed, status = fields[0], fields[1], fields[2], fields[3], fields[4]
    if status == "ok":
        report = EvalReport(
            per_endmember_sad=(),
            rms_sad=float(fields[5]),
            rms_aad=float(fields[6]),
            assignment=(),
            excluded_pixels=int(fields[7]),
        )
        error = None
    else:
        report = None
        error = fields[8] if len(fields) > 8 else "unknown"
    return CellOutcome(
        method=method, snr_db=parse_snr(snr), run=int(run), seed=int(seed),
        report=report, error=error,
    )


def aggregate_cells(cells_dir, methods, snr_grid) -> list[str]:
    """Aggregate table rows recomputed from the per-cell files on disk."""
    rows = []
    for method in methods:
        for snr in snr_grid:
            sad_values, aad_values, failed = [], [], 0
            for name in sorted(os.listdir(cells_dir)):
                if not name.startswith(f"{method}_snr{snr_tag(snr)}_run"):
                    continue
                outcome = read_cell(os.path.join(cells_dir, name))
                if outcome.report is None:
                    failed += 1
                else:
                    sad_values.append(outcome.report.rms_sad)
                    aad_values.append(outcome.report.rms_aad)

            def stats(values):
                if not values:
                    return "", ""
                arr = np.asarray(values)
                std = arr.std(ddof=1) if arr.size > 1 else 0.0
                return fileio.fmt(float(arr.mean())), fileio.fmt(float(std))

            sad_mean, sad_std = stats(sad_values)
            aad_mean, aad_std = stats(aad_values)
            rows.append(
                f"{method},{snr_tag(snr)},{len(sad_values)},{failed},"
                f"{sad_mean},{sad_std},{aad_mean},{aad_std}"
            )
    return rows


def _config_manifest(cfg: ExperimentConfig) -> dict:
    rows, cols = cfg.scene.image_size
    return {
        "rows": rows, "cols": cols, "block": cfg.scene.block_size,
        "filter": cfg.scene.filter_size, "purity": cfg.scene.purity_threshold,
        "p": cfg.scene.p,
        "layers": cfg.solver.layers, "tmax": cfg.solver.layer.t_max,
        "alpha0": cfg.solver.layer.alpha0, "tau": cfg.solver.layer.tau,
        "delta": cfg.solver.layer.delta, "epsilon": cfg.solver.layer.epsilon,
        "alpha_s_ratio": cfg.solver.layer.alpha_s_ratio,
        "stop_patience": cfg.solver.layer.stop_patience,
        "init": cfg.solver.init.value,
        "snr_grid": ",".join(snr_tag(s) for s in cfg.snr_grid),
        "runs": cfg.runs, "methods": ",".join(cfg.methods),
        "seed": cfg.master_seed, "library": cfg.library or "",
        "output_dir": cfg.output_dir,
    }


def run_bench(cfg: ExperimentConfig, out_dir=None) -> BenchResult:
    """Execute every cell of the experiment grid and write results.

    Individual cell failures are recorded in their cell files and the
    harness keeps going; inspect :attr:`BenchResult.failed`.
    """
    out = str(out_dir) if out_dir is not None else cfg.output_dir
    cells_dir = os.path.join(out, "cells")
    os.makedirs(cells_dir, exist_ok=True)

    lib = fileio.read_library(cfg.library) if cfg.library else demo_library()

    outcomes: list[CellOutcome] = []
    for snr in cfg.snr_grid:
        tag = snr_tag(snr)
        for run in range(cfg.runs):
            cell_seed = derive_seed(cfg.master_seed, "cell", tag, run)
            scene_error = None
            truth = noisy = None
            try:
                scene = replace(cfg.scene, seed=derive_seed(cfg.master_seed, "scene", tag, run))
                truth = generate_scene(lib, scene)
                noisy, _ = add_noise(
                    truth.clean_cube, snr, derive_seed(cfg.master_seed, "noise", tag, run)
                )
            except Exception as exc:  # noqa: BLE001 - cell isolation by design
                scene_error = f"scene generation failed: {exc}"
            for method in cfg.methods:
                if scene_error is None:
                    try:
                        a_est, s_est = _run_method(method, noisy, cfg, cell_seed)
                        report = evaluate_matrices(truth.A_true, truth.S_true, a_est, s_est)
                        outcome = CellOutcome(method, snr, run, cell_seed, report, None)
                    except Exception as exc:  # noqa: BLE001 - cell isolation by design
                        outcome = CellOutcome(method, snr, run, cell_seed, None, str(exc))
                else:
                    outcome = CellOutcome(method, snr, run, cell_seed, None, scene_error)
                outcomes.append(outcome)
                _write_cell(os.path.join(cells_dir, _cell_filename(method, snr, run)), outcome)

    rows = aggregate_cells(cells_dir, cfg.methods, cfg.snr_grid)
    aggregate_path = os.path.join(out, "aggregate.csv")
    fileio.atomic_write_text(aggregate_path, AGGREGATE_HEADER + "\n" + "\n".join(rows) + "\n")
    fileio.write_manifest(os.path.join(out, "bench_manifest.txt"), _config_manifest(cfg))
    return BenchResult(outcomes=tuple(outcomes), output_dir=out, aggregate_path=aggregate_path)
