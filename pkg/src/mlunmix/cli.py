"""Command-line interface.

Subcommands: ``synth`` (generate a scene), ``unmix`` (factor a cube),
``eval`` (score an estimate against truth), ``bench`` (Monte-Carlo grid).
Exit codes: 0 success, 1 usage/parameter error, 2 data error, 3 solver
divergence (for ``bench``: more than 10% of cells failed).
"""

import argparse
import math
import os
import sys
from dataclasses import replace

from . import fileio
from .bench import load_experiment_config, run_bench
from .core import SpectralCube
from .engine import LayerConfig
from .errors import ConfigError, DataFormatError, SolverDivergenceError, UnmixError
from .initialization import InitMethod
from .metrics import evaluate_matrices
from .multilayer import MlnmfConfig, run_mlnmf
from .seeding import derive_seed
from .synth import SceneSpec, add_noise, demo_library, generate_scene

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3

BENCH_FAILURE_BUDGET = 0.10


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 on usage errors (2 is the data-error code)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        rows, _, cols = text.lower().partition("x")
        return int(rows), int(cols)
    except ValueError as exc:
        raise ConfigError(f"bad --size {text!r}, expected ROWSxCOLS") from exc


def _parse_snr(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ConfigError(f"bad --snr {text!r}") from exc
    if math.isnan(value) or value == -math.inf:
        raise ConfigError(f"bad --snr {text!r}")
    return value


def _load_library(path):
    return fileio.read_library(path) if path else demo_library()


def _cmd_synth(args) -> int:
    lib = _load_library(args.library)
    spec = SceneSpec(
        image_size=_parse_size(args.size),
        block_size=args.block,
        filter_size=args.filter,
        purity_threshold=args.purity,
        p=args.p,
        seed=args.seed,
    )
    snr = _parse_snr(args.snr)
    truth = generate_scene(lib, spec)
    noisy, sigma = add_noise(truth.clean_cube, snr, derive_seed(args.seed, "noise"))

    os.makedirs(args.out, exist_ok=True)
    fileio.write_matrix(os.path.join(args.out, "clean.txt"), truth.clean_cube)
    fileio.write_matrix(os.path.join(args.out, "noisy.txt"), noisy)
    fileio.write_matrix(os.path.join(args.out, "A_true.txt"), truth.A_true)
    fileio.write_matrix(os.path.join(args.out, "S_true.txt"), truth.S_true)
    rows, cols = spec.image_size
    fileio.write_manifest(
        os.path.join(args.out, "manifest.txt"),
        {
            "tool": "synth", "rows": rows, "cols": cols,
            "block": spec.block_size, "filter": spec.filter_size,
            "purity": spec.purity_threshold, "p": spec.p,
            "snr_db": f"{snr:g}", "seed": spec.seed,
            "library": args.library or "<bundled>", "sigma": sigma,
        },
    )
    print(f"wrote scene ({lib.bands} bands, {rows}x{cols} pixels, p={spec.p}) to {args.out}")
    return EXIT_OK


def _cmd_unmix(args) -> int:
    cube = SpectralCube(fileio.read_matrix(args.cube))
    layer = LayerConfig(
        alpha0=args.alpha0,
        tau=args.tau,
        alpha_s_ratio=args.alpha_s_ratio,
        delta=args.delta,
        t_max=args.tmax,
        epsilon=args.eps,
    )
    cfg = MlnmfConfig(
        p=args.p, layers=args.layers, layer=layer,
        init=InitMethod(args.init), seed=args.seed,
    )
    result = run_mlnmf(cube, cfg)

    os.makedirs(args.out, exist_ok=True)
    fileio.write_matrix(os.path.join(args.out, "A_est.txt"), result.A)
    fileio.write_matrix(os.path.join(args.out, "S_est.txt"), result.S)
    manifest = {
        "tool": "unmix", "cube": args.cube, "p": cfg.p, "layers": cfg.layers,
        "alpha0": layer.alpha0, "tau": layer.tau, "delta": layer.delta,
        "tmax": layer.t_max, "epsilon": layer.epsilon,
        "alpha_s_ratio": layer.alpha_s_ratio, "init": cfg.init.value,
        "seed": cfg.seed,
    }
    for i, lr in enumerate(result.per_layer, start=1):
        fileio.write_matrix(
            os.path.join(args.out, f"layer_{i:02d}_A.txt"), lr.A
        )
        trace = [[c] for c in lr.cost_trace]
        fileio.write_matrix(os.path.join(args.out, f"layer_{i:02d}_cost.txt"), trace)
        manifest[f"layer_{i:02d}_iterations"] = lr.iterations_run
        manifest[f"layer_{i:02d}_stop"] = lr.stop_reason.value
    fileio.write_manifest(os.path.join(args.out, "manifest.txt"), manifest)
    print(f"unmixed {args.cube} with p={cfg.p}, layers={cfg.layers} -> {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    report = evaluate_matrices(
        fileio.read_matrix(args.true_a),
        fileio.read_matrix(args.true_s),
        fileio.read_matrix(args.est_a),
        fileio.read_matrix(args.est_s),
    )
    fileio.write_eval_report(args.out, report)
    print(
        f"rms_sad={report.rms_sad:.6f} rms_aad={report.rms_aad:.6f} "
        f"excluded_pixels={report.excluded_pixels} -> {args.out}"
    )
    return EXIT_OK


def _cmd_bench(args) -> int:
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key] = value
    cfg = load_experiment_config(args.config, overrides)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    result = run_bench(cfg)
    print(f"bench complete: {result.total} cells, {result.failed} failed")
    print(f"aggregate table: {result.aggregate_path}")
    if result.total and result.failed / result.total > BENCH_FAILURE_BUDGET:
        print(
            f"more than {BENCH_FAILURE_BUDGET:.0%} of cells failed", file=sys.stderr
        )
        return EXIT_SOLVER
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mlunmix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene")
    p_synth.add_argument("--size", default="64x64", help="image size ROWSxCOLS")
    p_synth.add_argument("--block", type=int, default=8, help="block edge in pixels")
    p_synth.add_argument("--filter", type=int, default=9, help="mean-filter size (odd)")
    p_synth.add_argument("--purity", type=float, default=0.8, help="purity threshold")
    p_synth.add_argument("--p", type=int, default=6, help="endmember count")
    p_synth.add_argument("--snr", default="inf", help="noise SNR in dB, or inf")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--library", default=None, help="library file (default: bundled)")
    p_synth.add_argument("--out", default="synth_out", help="output directory")
    p_synth.set_defaults(func=_cmd_synth)

    p_unmix = sub.add_parser("unmix", help="factor an observation cube")
    p_unmix.add_argument("cube", help="matrix file of the observation cube")
    p_unmix.add_argument("--p", type=int, required=True, help="endmember count")
    p_unmix.add_argument("--layers", type=int, default=10)
    p_unmix.add_argument("--alpha0", type=float, default=0.1)
    p_unmix.add_argument("--tau", type=float, default=25.0)
    p_unmix.add_argument("--delta", type=float, default=25.0)
    p_unmix.add_argument("--tmax", type=int, default=400)
    p_unmix.add_argument("--eps", type=float, default=1e-4)
    p_unmix.add_argument("--alpha-s-ratio", type=float, default=2.0, dest="alpha_s_ratio")
    p_unmix.add_argument("--init", choices=["vca", "random"], default="vca")
    p_unmix.add_argument("--seed", type=int, default=0)
    p_unmix.add_argument("--out", default="unmix_out", help="output directory")
    p_unmix.set_defaults(func=_cmd_unmix)

    p_eval = sub.add_parser("eval", help="score an estimate against ground truth")
    p_eval.add_argument("--true-a", required=True, dest="true_a")
    p_eval.add_argument("--true-s", required=True, dest="true_s")
    p_eval.add_argument("--est-a", required=True, dest="est_a")
    p_eval.add_argument("--est-s", required=True, dest="est_s")
    p_eval.add_argument("--out", default="eval_report.csv", help="report file")
    p_eval.set_defaults(func=_cmd_eval)

    p_bench = sub.add_parser("bench", help="run the Monte-Carlo benchmark grid")
    p_bench.add_argument("config", help="key=value experiment config file")
    p_bench.add_argument("--out", default=None, help="override output directory")
    p_bench.add_argument(
        "--set", action="append", metavar="KEY=VALUE", help="override a config key"
    )
    p_bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"mlunmix: parameter error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverDivergenceError as exc:
        print(f"mlunmix: solver diverged: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataFormatError, UnmixError, OSError, ValueError) as exc:
        print(f"mlunmix: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
