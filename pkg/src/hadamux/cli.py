"""Command-line interface: gen-matrix, validate, simulate, sweep, report, decode."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import CONSENSUS_ROW, METHODS, summarize
from .codes import build_s_matrix, validate_s_matrix
from .harness import ExperimentConfig, default_k_grid, emit_report, resolve_sigma, run_sweep, _run_trial
from .report import load_result

CONFIG_KEYS = (
    "order",
    "length",
    "spectrum",
    "synth",
    "sigma",
    "slit_target_db",
    "nondispersive_sigma",
    "k_grid",
    "trials",
    "seed",
    "methods",
    "out_dir",
    "workers",
    "bound_ks",
    "bound_instances",
    "bound_noise_draws",
    "report_ks",
    "mms_coding",
)


def _load_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _write_matrix_csv(path, matrix, fmt="%d") -> None:
    np.savetxt(path, matrix, fmt=fmt, delimiter=",", newline="\n")


def _parse_k_list(text: str) -> tuple[float, ...]:
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ValueError(f"k range must be start:stop:step, got {text!r}")
        start, stop, step = parts
        if step <= 0:
            raise ValueError("k range step must be positive")
        count = int(round((stop - start) / step)) + 1
        return tuple(round(start + i * step, 10) for i in range(count))
    return tuple(float(p) for p in text.split(","))


def parse_config_file(path) -> ExperimentConfig:
    """Parse a plain-text `key = value` sweep configuration (# starts a comment)."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}; valid keys: {', '.join(CONFIG_KEYS)}")
            values[key] = val
    if "spectrum" in values and "synth" in values:
        raise ValueError(f"{path}: 'spectrum' (file) and 'synth' (kind) are mutually exclusive")

    kwargs: dict = {}
    if "order" in values:
        kwargs["order"] = int(values["order"])
    if "length" in values:
        kwargs["spectrum_length"] = int(values["length"])
    if "spectrum" in values:
        kwargs["spectrum_path"] = values["spectrum"]
    if "synth" in values:
        kwargs["spectrum_kind"] = values["synth"]
    if "sigma" in values and values["sigma"] != "auto":
        kwargs["sigma"] = float(values["sigma"])
    for key, attr in (
        ("slit_target_db", "slit_target_db"),
        ("nondispersive_sigma", "nondispersive_sigma"),
    ):
        if key in values:
            kwargs[attr] = float(values[key])
    if "k_grid" in values:
        kwargs["k_grid"] = _parse_k_list(values["k_grid"])
    for key in ("trials", "seed", "workers", "bound_instances", "bound_noise_draws"):
        if key in values:
            kwargs[key] = int(values[key])
    if "methods" in values:
        kwargs["methods"] = tuple(m.strip() for m in values["methods"].split(",") if m.strip())
    if "out_dir" in values:
        kwargs["out_dir"] = values["out_dir"]
    for key in ("bound_ks", "report_ks"):
        if key in values:
            kwargs[key] = _parse_k_list(values[key])
    if "mms_coding" in values:
        kwargs["mms_coding"] = values["mms_coding"]
    return ExperimentConfig(**kwargs)


def _cmd_gen_matrix(args) -> int:
    S = build_s_matrix(args.order)
    _write_matrix_csv(args.out, S.entries)
    print(f"wrote order-{args.order} S-matrix to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    M = _load_matrix_csv(args.matrix)
    report = validate_s_matrix(M)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def _cmd_decode(args) -> int:
    from .recon import decode_inverse, decode_nnls, shift_extract

    coding = _load_matrix_csv(args.coding)
    g = _load_matrix_csv(args.measurement)
    if args.method == "nnls":
        est = decode_nnls(coding, g)
    else:
        est = decode_inverse(coding, g)
    rows = shift_extract(est)
    _write_matrix_csv(args.out, rows.rows, fmt="%.12g")
    print(
        f"decoded {g.shape[0]}x{g.shape[1]} measurement with {args.method}; "
        f"wrote {rows.rows.shape[0]} spectra of length {rows.rows.shape[1]} to {args.out} "
        f"(residual {est.diagnostics['residual_norm']:.4g})"
    )
    return 0


def _build_simulate_config(args) -> ExperimentConfig:
    kwargs: dict = {
        "order": args.order,
        "seed": args.seed,
        "k_grid": (args.k,),
        "trials": 1,
    }
    if args.sigma is not None:
        kwargs["sigma"] = args.sigma
    if args.spectrum:
        kwargs["spectrum_path"] = args.spectrum
    else:
        kwargs["spectrum_kind"] = args.synth
    if args.length:
        kwargs["spectrum_length"] = args.length
    if args.methods:
        kwargs["methods"] = tuple(m.strip() for m in args.methods.split(","))
    return ExperimentConfig(**kwargs)


def _cmd_simulate(args) -> int:
    config = _build_simulate_config(args)
    sigma = resolve_sigma(config)
    seq = np.random.SeedSequence(config.seed, spawn_key=(0,))
    samples, artifacts = _run_trial(
        config,
        args.k,
        seq,
        trial_index=0,
        sigma=sigma,
        capture_measurements=args.dump_measurements is not None,
    )
    print(f"order {config.order}, k = {args.k}, sigma = {sigma:.6g}, seed = {config.seed}")
    for method in config.methods:
        rows = [s.snr_db for s in samples if s.method == method and s.row != CONSENSUS_ROW]
        consensus = [s.snr_db for s in samples if s.method == method and s.row == CONSENSUS_ROW]
        finite = [v for v in rows if np.isfinite(v)]
        if finite:
            summary = summarize(finite) if len(finite) > 1 else None
            mean = summary.mean_db if summary else finite[0]
            spread = f"std {summary.std_db:.2f}" if summary else "single row"
            exact = len(rows) - len(finite)
            note = f", {exact} exact" if exact else ""
            print(f"  {method:9s} rows: mean {mean:7.2f} dB ({spread}{note}); consensus {consensus[0]:.2f} dB")
        else:
            print(f"  {method:9s} rows: all exact (infinite SNR); consensus {consensus[0]:.2f} dB")
    if args.dump_measurements is not None:
        outdir = Path(args.dump_measurements)
        outdir.mkdir(parents=True, exist_ok=True)
        for name, data in artifacts.measurements.items():
            _write_matrix_csv(outdir / f"{name}.csv", np.atleast_2d(data), fmt="%.12g")
        print(f"measurements dumped to {outdir}")
    return 0


def _cmd_sweep(args) -> int:
    config = parse_config_file(args.config)
    if config.out_dir is None:
        raise ValueError(f"{args.config}: set out_dir to receive sweep outputs")
    result = run_sweep(config)
    written = emit_report(result, config.out_dir)
    print(
        f"sweep finished: {result.meta['n_trials']} trials "
        f"({result.meta['n_failures']} failed) in {result.meta['wall_seconds']:.1f}s"
    )
    _print_gain_note(written["table1"])
    print(f"report written to {config.out_dir}")
    return 0


def _cmd_report(args) -> int:
    result = load_result(args.infile)
    written = emit_report(result, args.out)
    _print_gain_note(written["table1"])
    print(f"report written to {args.out}")
    return 0


def _print_gain_note(table1_path) -> None:
    import json

    with open(table1_path, encoding="utf-8") as fh:
        table1 = json.load(fh)
    gain = table1["multiplex_gain"]
    observed = gain["observed_hts_minus_slit_db"]
    observed_s = f"{observed:.2f} dB" if observed is not None else "n/a"
    print(
        f"multiplex gain: analytic {gain['analytic_db']:.2f} dB, observed HTS-slit {observed_s}, "
        f"reference ~{gain['reference_gap_db']:.1f} dB -- DISCREPANCY FLAGGED (see table1.json)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hadamux",
        description="Snapshot Hadamard-transform spectrometry simulator with sub-Hadamard-S coding.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-matrix", help="Write an S-matrix as 0/1 CSV.")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_matrix)

    p = sub.add_parser("validate", help="Check every S-matrix invariant of a CSV matrix.")
    p.add_argument("--matrix", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("simulate", help="Run one paired trial and print per-method SNR.")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--sigma", type=float, default=None, help="detector sigma (default: calibrated)")
    p.add_argument("--order", type=int, default=127)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spectrum", default=None, help="spectrum CSV file")
    p.add_argument("--synth", default="solar_like", help="synthetic spectrum kind")
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--methods", default=None, help="comma list, default all")
    p.add_argument("--dump-measurements", default=None, metavar="DIR")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="Run the Monte Carlo k sweep from a config file.")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="Re-emit report files from a persisted sweep.")
    p.add_argument("--in", dest="infile", required=True, help="sweep output dir or result.json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("decode", help="Decode a CSV measurement with a CSV coding matrix.")
    p.add_argument("--coding", required=True)
    p.add_argument("--measurement", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("inverse", "nnls"), default="inverse")
    p.set_defaults(func=_cmd_decode)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
