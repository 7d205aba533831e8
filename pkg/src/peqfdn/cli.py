"""Command-line front end: fit, export, render, and campaign subcommands.

Exit codes: 0 on success, 1 for bad arguments or unreadable/malformed
inputs, 2 when the numerics give up (diverging fit, unstable render,
campaign with too many failed curves).  All output files are written to a
temporary name in the destination directory and renamed into place, so a
crash never leaves a half-written artifact behind.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .digitize import digitization_report, peq_to_sos, sos_to_csv, sos_to_dict
from .errors import (
    CampaignError,
    FitDivergenceError,
    InstabilityError,
    InsufficientDecayError,
    InvalidParameterError,
    NonDecayingResponseError,
    NumericalFailureError,
    ParseError,
    PeqFdnError,
)
from .evaluate import (
    DEFAULT_DELAY_DRAW_S,
    op_count,
    run_campaign,
    synthetic_smooth_curves,
)
from .fdn import (
    DEFAULT_DELAY_RANGE_S,
    FdnConfig,
    decay_measurements_to_csv,
    default_delays,
    default_gains,
    default_render_duration,
    householder_matrix,
    render_ir,
    schroeder_t60,
    write_wav,
)
from .optimize import FitConfig, fit
from .peq import FittedPeq, peq_log_magnitude, response_to_t60, scale_to_delay
from .targets import FrequencyGrid, load_t60_table

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2

# Octave centers measured by the render subcommand's decay report.
RENDER_OCTAVES_HZ = (250.0, 500.0, 1000.0, 2000.0, 4000.0)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool reserves 2 for numerics."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _fail(message: str) -> SystemExit:
    sys.stderr.write(f"error: {message}\n")
    return SystemExit(EXIT_USAGE)


def _write_text_atomic(path: str, text: str) -> None:
    """Write text via a same-directory temp file and an atomic rename."""
    path = os.path.abspath(path)
    directory = os.path.dirname(path)
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp.", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.chmod(tmp, 0o644)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_wav_atomic(path: str, ir: np.ndarray, fs: float) -> None:
    path = os.path.abspath(path)
    directory = os.path.dirname(path)
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp.", suffix=".wav")
    os.close(fd)
    try:
        write_wav(tmp, ir, fs)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_dumps(obj) -> str:
    # sort_keys plus a trailing newline keeps serialized output byte-stable
    # across runs for identical inputs.
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_curve(path: str):
    if not os.path.exists(path):
        raise _fail(f"T60 table not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    name = os.path.splitext(os.path.basename(path))[0]
    return load_t60_table(text, name=name)


def _load_fitted(path: str) -> FittedPeq:
    if not os.path.exists(path):
        raise _fail(f"fit file not found: {path}")
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return FittedPeq.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: not a fit result ({exc})") from exc


def _resolve_m_ref(args, fs: float) -> int:
    """Reference delay in samples from --delay-ms / --delay-samples."""
    if args.delay_samples is not None:
        m_ref = int(round(args.delay_samples))
    elif args.delay_ms is not None:
        m_ref = int(round(args.delay_ms * 1e-3 * fs))
    else:
        m_ref = int(round(0.1 * fs))  # 100 ms reference
    if m_ref < 1:
        raise _fail(f"reference delay must be at least one sample, got {m_ref}")
    return m_ref


def _parse_delay_list(text: str) -> list[int]:
    items = [part.strip() for part in text.split(",") if part.strip()]
    if not items:
        raise _fail("delay list is empty")
    try:
        delays = [int(part) for part in items]
    except ValueError:
        raise _fail(f"delay list must be comma-separated integers, got {text!r}")
    if any(m < 1 for m in delays):
        raise _fail("delays must be >= 1 sample")
    return delays


def _parse_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise _fail(f"range must look like LO:HI, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise _fail(f"range must be numeric, got {text!r}")
    if not (0 < lo <= hi):
        raise _fail(f"range must satisfy 0 < lo <= hi, got {text!r}")
    return lo, hi


def _add_common_fit_args(parser) -> None:
    parser.add_argument("--fs", type=float, default=48000.0, help="sample rate in Hz")
    parser.add_argument("--bands", type=int, default=12, help="PEQ bands (>= 3)")
    parser.add_argument("--iterations", type=int, default=10000)
    parser.add_argument("--lr", type=float, default=0.1, help="Adam learning rate")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--grid", type=int, default=512, help="frequency grid size")
    parser.add_argument("--quiet", action="store_true", help="suppress progress lines")


def cmd_fit(args) -> int:
    curve = _load_curve(args.t60)
    m_ref = _resolve_m_ref(args, args.fs)
    grid = FrequencyGrid.log_spaced(args.fs, size=args.grid)
    cfg = FitConfig(
        n_bands=args.bands,
        iterations=args.iterations,
        learning_rate=args.lr,
        seed=args.seed,
        grid=grid,
    )

    progress = None
    if not args.quiet:
        def progress(iteration, loss):
            sys.stderr.write(f"iter {iteration:6d}  mse {loss:.6e} dB^2\n")

    fitted, report = fit(curve, m_ref, args.fs, cfg, progress=progress)

    _write_text_atomic(args.out, _json_dumps(fitted.to_dict()))
    report_path = args.report
    if report_path is None:
        stem, _ = os.path.splitext(args.out)
        report_path = stem + ".report.json"
    report_doc = report.to_dict()
    report_doc["curve"] = curve.name
    report_doc["m_ref"] = m_ref
    cost = op_count(args.bands)
    report_doc["ops_per_sample"] = cost.ops_per_sample
    report_doc["parameters"] = cost.parameters
    _write_text_atomic(report_path, _json_dumps(report_doc))
    if not args.quiet:
        sys.stderr.write(
            f"fit {curve.name or args.t60}: mse {report.final_mse:.6e} dB^2 "
            f"-> {args.out}\n"
        )
    return EXIT_OK


def cmd_export(args) -> int:
    fitted = _load_fitted(args.fit)
    fs = fitted.fs
    if args.delay_samples is not None:
        delays = _parse_delay_list(args.delay_samples)
    else:
        lo, hi = _parse_range(args.delay_range)
        delays = list(default_delays(args.lines, lo, hi, fs))

    os.makedirs(args.out_dir, exist_ok=True)
    report_grid = FrequencyGrid.log_spaced(fs, size=512)
    manifest = {"fs": fs, "m_ref": fitted.m_ref, "lines": []}
    for k, m_k in enumerate(delays):
        params = scale_to_delay(fitted, m_k)
        cascade = peq_to_sos(params, fs)
        stem = f"line{k:02d}_m{m_k}"
        csv_path = os.path.join(args.out_dir, stem + ".csv")
        json_path = os.path.join(args.out_dir, stem + ".json")
        _write_text_atomic(csv_path, sos_to_csv(cascade))
        doc = sos_to_dict(cascade)
        doc["delay_samples"] = m_k
        doc["digitization"] = digitization_report(params, fs, report_grid.freqs)
        _write_text_atomic(json_path, _json_dumps(doc))
        manifest["lines"].append(
            {
                "delay_samples": m_k,
                "sections": len(cascade.sections),
                "csv": os.path.basename(csv_path),
                "json": os.path.basename(json_path),
            }
        )
    _write_text_atomic(
        os.path.join(args.out_dir, "manifest.json"), _json_dumps(manifest)
    )
    if not args.quiet:
        total = sum(entry["sections"] for entry in manifest["lines"])
        sys.stderr.write(
            f"exported {len(delays)} lines, {total} biquads -> {args.out_dir}\n"
        )
    return EXIT_OK


def cmd_render(args) -> int:
    fitted = _load_fitted(args.fit)
    fs = fitted.fs
    if args.delay_samples is not None:
        delays = _parse_delay_list(args.delay_samples)
    else:
        lo, hi = _parse_range(args.delay_range)
        delays = list(default_delays(args.lines, lo, hi, fs))
    n_lines = len(delays)

    grid = FrequencyGrid.log_spaced(fs, size=512)
    response_db = peq_log_magnitude(fitted.params, grid.freqs)
    try:
        t60_profile = response_to_t60(response_db, fitted.m_ref, fs)
    except NonDecayingResponseError as exc:
        raise _fail(f"fit does not decay everywhere: {exc}")

    if args.duration is not None:
        if args.duration <= 0:
            raise _fail(f"duration must be > 0 seconds, got {args.duration}")
        duration = args.duration
    else:
        duration = default_render_duration(float(np.max(t60_profile)))

    input_gains, output_gains = default_gains(n_lines)
    cfg = FdnConfig(
        delays=tuple(delays),
        fs=fs,
        feedback=householder_matrix(n_lines),
        cascades=tuple(
            peq_to_sos(scale_to_delay(fitted, m_k), fs) for m_k in delays
        ),
        input_gains=input_gains,
        output_gains=output_gains,
        duration_s=duration,
    )
    ir = render_ir(cfg)
    _write_wav_atomic(args.out, ir, fs)

    measurements = []
    try:
        measurements.append(schroeder_t60(ir, fs))
    except InsufficientDecayError as exc:
        sys.stderr.write(f"warning: broadband decay unmeasurable: {exc}\n")
    for fc in RENDER_OCTAVES_HZ:
        if fc * np.sqrt(2.0) >= fs / 2:
            continue
        try:
            measurements.append(schroeder_t60(ir, fs, band_hz=fc))
        except InsufficientDecayError as exc:
            sys.stderr.write(f"warning: {fc:.0f} Hz decay unmeasurable: {exc}\n")

    decay_path = args.decay_csv
    if decay_path is None:
        stem, _ = os.path.splitext(args.out)
        decay_path = stem + ".decay.csv"
    _write_text_atomic(decay_path, decay_measurements_to_csv(measurements))
    if not args.quiet:
        for meas in measurements:
            label = "broadband" if meas.band_hz is None else f"{meas.band_hz:.0f} Hz"
            sys.stderr.write(f"T60 {label}: {meas.t60_s:.3f} s\n")
    return EXIT_OK


def cmd_campaign(args) -> int:
    if (args.t60_dir is None) == (args.synthetic is None):
        raise _fail("pass exactly one of --t60-dir or --synthetic")
    if args.t60_dir is not None:
        if not os.path.isdir(args.t60_dir):
            raise _fail(f"not a directory: {args.t60_dir}")
        paths = sorted(
            os.path.join(args.t60_dir, name)
            for name in os.listdir(args.t60_dir)
            if name.lower().endswith(".csv")
        )
        if not paths:
            raise _fail(f"no .csv T60 tables in {args.t60_dir}")
        curves = [_load_curve(path) for path in paths]
    else:
        if args.synthetic < 1:
            raise _fail(f"--synthetic needs a positive count, got {args.synthetic}")
        curves = synthetic_smooth_curves(args.synthetic, seed=args.seed)

    grid = FrequencyGrid.log_spaced(args.fs, size=args.grid)
    cfg = FitConfig(
        n_bands=args.bands,
        iterations=args.iterations,
        learning_rate=args.lr,
        seed=args.seed,
        grid=grid,
    )
    delay_range = _parse_range(args.delay_range)
    result = run_campaign(
        curves, cfg, delay_range_s=delay_range, fs=args.fs, workers=args.workers
    )

    os.makedirs(args.out_dir, exist_ok=True)
    summary = result.to_summary_dict()
    summary["bands"] = args.bands
    cost = op_count(args.bands)
    summary["ops_per_sample"] = cost.ops_per_sample
    summary["parameters"] = cost.parameters
    _write_text_atomic(os.path.join(args.out_dir, "summary.json"), _json_dumps(summary))
    _write_text_atomic(
        os.path.join(args.out_dir, "histogram.csv"), result.distribution.to_csv()
    )
    if not args.quiet:
        dist = result.distribution
        sys.stderr.write(
            f"campaign: {len(curves)} curves, median {dist.median_pct:+.2f}%, "
            f"p95 |err| {dist.p95_abs_pct:.2f}%, max |err| {dist.max_abs_pct:.2f}%\n"
        )
        for curve in result.flagged:
            sys.stderr.write(
                f"warning: {curve.name} exceeds the 25% envelope "
                f"(max |err| {curve.max_abs_error_pct:.1f}%)\n"
            )
        for _, name, reason in result.failures:
            sys.stderr.write(f"warning: {name} failed to fit: {reason}\n")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(
        prog="peqfdn",
        description="Fit, digitize, and verify FDN attenuation filters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a PEQ to a T60 table")
    p_fit.add_argument("--t60", required=True, help="CSV of frequency_hz,t60_s rows")
    p_fit.add_argument("--out", required=True, help="fit result JSON path")
    p_fit.add_argument("--report", default=None, help="fit report JSON path")
    delay = p_fit.add_mutually_exclusive_group()
    delay.add_argument("--delay-ms", type=float, default=None)
    delay.add_argument("--delay-samples", type=float, default=None)
    _add_common_fit_args(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_export = sub.add_parser("export", help="emit per-line biquad coefficients")
    p_export.add_argument("--fit", required=True, help="fit result JSON")
    p_export.add_argument("--out-dir", required=True)
    p_export.add_argument("--lines", type=int, default=8, help="delay line count")
    p_export.add_argument(
        "--delay-samples", default=None, help="comma-separated delays in samples"
    )
    p_export.add_argument(
        "--delay-range",
        default=f"{DEFAULT_DELAY_RANGE_S[0]}:{DEFAULT_DELAY_RANGE_S[1]}",
        help="LO:HI delay range in seconds for generated delays",
    )
    p_export.add_argument("--quiet", action="store_true")
    p_export.set_defaults(func=cmd_export)

    p_render = sub.add_parser("render", help="render an FDN impulse response")
    p_render.add_argument("--fit", required=True, help="fit result JSON")
    p_render.add_argument("--out", required=True, help="output WAV path")
    p_render.add_argument("--decay-csv", default=None, help="decay table path")
    p_render.add_argument("--lines", type=int, default=8)
    p_render.add_argument(
        "--delay-samples", default=None, help="comma-separated delays in samples"
    )
    p_render.add_argument(
        "--delay-range",
        default=f"{DEFAULT_DELAY_RANGE_S[0]}:{DEFAULT_DELAY_RANGE_S[1]}",
        help="LO:HI delay range in seconds for generated delays",
    )
    p_render.add_argument(
        "--duration", type=float, default=None, help="seconds of output"
    )
    p_render.add_argument("--quiet", action="store_true")
    p_render.set_defaults(func=cmd_render)

    p_camp = sub.add_parser("campaign", help="fit a batch of T60 tables")
    source = p_camp.add_mutually_exclusive_group()
    source.add_argument("--t60-dir", default=None, help="directory of T60 CSVs")
    source.add_argument(
        "--synthetic", type=int, default=None, help="generate N random smooth curves"
    )
    p_camp.add_argument("--out-dir", required=True)
    p_camp.add_argument(
        "--delay-range",
        default=f"{DEFAULT_DELAY_DRAW_S[0]}:{DEFAULT_DELAY_DRAW_S[1]}",
        help="LO:HI range the per-curve delays are drawn from, seconds",
    )
    p_camp.add_argument("--workers", type=int, default=1)
    _add_common_fit_args(p_camp)
    p_camp.set_defaults(func=cmd_campaign)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        # _Parser.error and _fail raise SystemExit; fold into the return code
        # so in-process callers see an int rather than an exception.
        return 0 if exc.code is None else int(exc.code)
    except (ParseError, InvalidParameterError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (
        FitDivergenceError,
        InstabilityError,
        CampaignError,
        NumericalFailureError,
        NonDecayingResponseError,
    ) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    except PeqFdnError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
