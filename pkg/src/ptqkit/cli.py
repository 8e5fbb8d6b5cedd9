"""Command-line front-end.

Subcommands: gen, inspect, quantize, dequantize, report, sweep.  Exit
codes: 0 on success, 2 for usage errors (argparse or cross-flag
violations), 1 for data errors (bad files, degenerate inputs, IO).
All outputs are deterministic for identical flags and input files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .errors import PtqError
from .importance import ImportanceConfig, layer_score, partition
from .metrics import (
    CSV_COLUMNS,
    build_report,
    emit_report,
    histogram_cell,
    model_size_bits,
    to_mbit,
    write_report_json,
    write_sweep_csv,
)
from .piecewise import DEFAULT_GRID_SIZE, dequantize_model, quantize_model
from .store import (
    MAGIC_BUNDLE,
    MAGIC_QUANT,
    load_bundle,
    load_quantized,
    save_bundle,
    save_quantized,
)
from .synth import DISTRIBUTIONS, gen_model, resolve_descriptor


def _percent(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 100.0:
        raise argparse.ArgumentTypeError(f"{value} not in [0, 100]")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} not in [0, 1]")
    return value


def _bits(text: str) -> int:
    value = int(text)
    if not 2 <= value <= 32:
        raise argparse.ArgumentTypeError(f"bit width {value} not in 2..32")
    return value


def _act_bits(text: str) -> int:
    value = int(text)
    if not 1 <= value <= 32:
        raise argparse.ArgumentTypeError(f"activation width {value} not in 1..32")
    return value


def _grid(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"grid size {value} must be at least 2")
    return value


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"{value} must be positive")
    return value


def _alpha_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("alpha list is empty")
    for value in values:
        if not 0.0 <= value <= 100.0:
            raise argparse.ArgumentTypeError(f"alpha {value} not in [0, 100]")
    return values


def _add_partition_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beta", type=_fraction, required=True,
                        help="fraction of channels marked important, in [0, 1]")
    parser.add_argument("--bits-important", type=_bits, required=True,
                        help="bit width for important channels (2..32)")
    parser.add_argument("--bits-other", type=_bits, required=True,
                        help="bit width for the remaining channels (2..32)")
    parser.add_argument("--grid", type=_grid, default=DEFAULT_GRID_SIZE,
                        help="split-search grid size (default %(default)s)")
    parser.add_argument("--normalize-fl", action="store_true",
                        help="divide the layer score by the layer's weight count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptqkit",
        description="Mixed-precision post-training weight quantization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic weight bundle")
    p.add_argument("--arch", required=True,
                   help="built-in name (resnet50-like, mobilenetv2-like) or descriptor JSON path")
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="gaussian")
    p.add_argument("--sigma", type=_positive, default=0.05,
                   help="gaussian sigma / laplace scale / uniform half-range")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output .ptqb path")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("inspect", help="summarize a .ptqb or .ptqq file")
    p.add_argument("file")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("quantize", help="partition, quantize and report")
    p.add_argument("--model", required=True, help="input .ptqb path")
    p.add_argument("--alpha", type=_percent, required=True,
                   help="percent of layers marked important, in [0, 100]")
    _add_partition_flags(p)
    p.add_argument("--act-bits", type=_act_bits, required=True,
                   help="activation bit width used in BOPs totals")
    p.add_argument("--out", required=True, help="output .ptqq path")
    p.add_argument("--report", required=True, help="output report JSON path")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("dequantize", help="decode a .ptqq back to float32")
    p.add_argument("--model", required=True, help="input .ptqq path")
    p.add_argument("--out", required=True, help="output .ptqb path")
    p.set_defaults(func=cmd_dequantize)

    p = sub.add_parser("report", help="measure a quantized model against its original")
    p.add_argument("--original", required=True, help=".ptqb path")
    p.add_argument("--quantized", required=True, help=".ptqq path")
    p.add_argument("--format", choices=("json", "csv"), required=True)
    p.add_argument("--out", help="write to a file instead of stdout")
    p.add_argument("--act-bits", type=_act_bits, default=8)
    p.add_argument("--plot-dir", help="also render report figures into this directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="quantize at several alphas, tabulate size/error/BOPs")
    p.add_argument("--model", required=True, help="input .ptqb path")
    p.add_argument("--alphas", type=_alpha_list, required=True,
                   help="comma-separated percentages, e.g. 5,10,20")
    _add_partition_flags(p)
    p.add_argument("--act-bits", type=_act_bits, default=8)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--plot-dir", help="also render sweep figures into this directory")
    p.set_defaults(func=cmd_sweep)

    return parser


def _partition_config(args, alpha: float) -> ImportanceConfig:
    return ImportanceConfig(
        alpha=alpha,
        beta=args.beta,
        bits_important=args.bits_important,
        bits_other=args.bits_other,
        normalize_layer_score=args.normalize_fl,
    )


def _config_echo(args, alpha: float) -> dict:
    return {
        "alpha": alpha,
        "beta": args.beta,
        "bits_important": args.bits_important,
        "bits_other": args.bits_other,
        "act_bits": args.act_bits,
        "grid_size": args.grid,
        "normalize_layer_score": args.normalize_fl,
    }


def cmd_gen(args) -> int:
    arch = resolve_descriptor(args.arch)
    bundle = gen_model(arch, dist=args.dist, scale=args.sigma, seed=args.seed)
    save_bundle(bundle, args.out)
    print(
        f"wrote {args.out}: {bundle.model_name}, {len(bundle.layers)} layers, "
        f"{bundle.total_weights} weights"
    )
    return 0


def cmd_inspect(args) -> int:
    with open(args.file, "rb") as fh:
        magic = fh.read(4)
    if magic == MAGIC_QUANT:
        model = load_quantized(args.file)
        total_bits = model_size_bits(
            model.layers, [layer.channel_bits for layer in model.layers]
        )
        print(f"quantized model {model.model_name}")
        print(f"layers: {len(model.layers)}  weights: {model.total_weights}")
        print(f"code size: {to_mbit(total_bits):.4f} Mbit")
        print(f"{'idx':>4} {'kind':<5} {'params':>10} {'p':>12} {'l':>12}  bits")
        for layer in model.layers:
            histogram = {}
            for width in layer.channel_bits:
                histogram[width] = histogram.get(width, 0) + 1
            mix = " ".join(f"{w}x{c}" for w, c in sorted(histogram.items()))
            print(
                f"{layer.layer_index:>4} {layer.kind:<5} {layer.weight_count:>10} "
                f"{layer.split:>12.6g} {layer.bound:>12.6g}  {mix}"
            )
    else:
        bundle = load_bundle(args.file)
        print(f"bundle {bundle.model_name}")
        print(f"layers: {len(bundle.layers)}  weights: {bundle.total_weights}")
        print(f"float32 size: {to_mbit(32 * bundle.total_weights):.4f} Mbit")
        print(f"{'idx':>4} {'kind':<5} {'params':>10} {'channels':>8} {'score':>14}")
        for layer in bundle.layers:
            score = layer_score(bundle.tensor_for(layer).data)
            print(
                f"{layer.layer_index:>4} {layer.kind:<5} {layer.weight_count:>10} "
                f"{layer.out_channels:>8} {score:>14.6g}"
            )
    return 0


def cmd_quantize(args) -> int:
    bundle = load_bundle(args.model)
    config = _partition_config(args, args.alpha)
    part = partition(bundle, config)
    quantized = quantize_model(bundle, part, grid_size=args.grid)
    save_quantized(quantized, args.out)
    report = build_report(
        bundle, quantized, act_bits=args.act_bits, config=_config_echo(args, args.alpha)
    )
    write_report_json(report, args.report)
    print(f"quantized {bundle.model_name}: {args.out}")
    print(
        f"size: {to_mbit(report.baseline_bits):.4f} -> "
        f"{to_mbit(report.quantized_bits):.4f} Mbit "
        f"({report.size_reduction_pct:.2f}% reduction, "
        f"+{to_mbit(report.overhead_bits):.4f} Mbit overhead)"
    )
    print(f"total MSE: {report.total_mse:.6g}  total BOPs: {report.total_bops:.6g}")
    return 0


def cmd_dequantize(args) -> int:
    model = load_quantized(args.model)
    bundle = dequantize_model(model)
    save_bundle(bundle, args.out)
    print(f"decoded {model.model_name} -> {args.out}")
    return 0


def cmd_report(args) -> int:
    bundle = load_bundle(args.original)
    quantized = load_quantized(args.quantized)
    report = build_report(bundle, quantized, act_bits=args.act_bits)
    if args.out:
        emit_report(report, args.out, args.format)
    elif args.format == "json":
        print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for layer in report.layers:
            writer.writerow(
                [
                    layer.layer_index,
                    layer.params,
                    histogram_cell(layer.bits_histogram),
                    repr(layer.split),
                    repr(layer.bound),
                    repr(layer.mse),
                    repr(layer.bops),
                ]
            )
    if args.plot_dir:
        from .plots import save_report_figures

        for path in save_report_figures(report, args.plot_dir):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    bundle = load_bundle(args.model)
    rows = []
    for alpha in args.alphas:
        config = _partition_config(args, alpha)
        part = partition(bundle, config)
        quantized = quantize_model(bundle, part, grid_size=args.grid)
        report = build_report(
            bundle, quantized, act_bits=args.act_bits, config=_config_echo(args, alpha)
        )
        rows.append(
            {
                "alpha": alpha,
                "size_mbit": to_mbit(report.quantized_bits),
                "total_mse": report.total_mse,
                "total_bops": report.total_bops,
            }
        )
        print(
            f"alpha={alpha:g}: {rows[-1]['size_mbit']:.4f} Mbit, "
            f"mse={rows[-1]['total_mse']:.6g}, bops={rows[-1]['total_bops']:.6g}"
        )
    write_sweep_csv(rows, args.out)
    print(f"wrote {args.out}")
    if args.plot_dir:
        from .plots import save_sweep_figures

        for path in save_sweep_figures(rows, args.plot_dir):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "bits_important") and args.bits_important < args.bits_other:
        parser.error("--bits-important must not be below --bits-other")
    try:
        return args.func(args)
    except (PtqError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    entrypoint()
