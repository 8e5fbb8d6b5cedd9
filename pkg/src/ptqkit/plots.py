"""Figure rendering for reports and sweeps.

Always uses the headless Agg backend and writes PNG files; callers pass
an output directory and get back the list of written paths.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import QuantReport


def save_report_figures(report: QuantReport, outdir) -> list[Path]:
    """Per-layer MSE bars and the channel bit-width mix per layer."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    indices = [layer.layer_index for layer in report.layers]

    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(indices, [layer.mse for layer in report.layers], color="#3465a4")
    ax.set_xlabel("layer index")
    ax.set_ylabel("MSE")
    ax.set_yscale("log")
    ax.set_title(f"{report.model_name}: per-layer quantization error")
    fig.tight_layout()
    path = outdir / "per_layer_mse.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    widths = sorted({w for layer in report.layers for w in layer.bits_histogram})
    fig, ax = plt.subplots(figsize=(8, 4))
    bottom = [0] * len(indices)
    for width in widths:
        counts = [layer.bits_histogram.get(width, 0) for layer in report.layers]
        ax.bar(indices, counts, bottom=bottom, label=f"{width}-bit")
        bottom = [b + c for b, c in zip(bottom, counts)]
    ax.set_xlabel("layer index")
    ax.set_ylabel("output channels")
    ax.set_title(f"{report.model_name}: channel bit widths")
    ax.legend()
    fig.tight_layout()
    path = outdir / "channel_bits.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def save_sweep_figures(rows: list[dict], outdir) -> list[Path]:
    """Size/error trade-off curve and BOPs versus alpha."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    alphas = [row["alpha"] for row in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(
        [row["size_mbit"] for row in rows],
        [row["total_mse"] for row in rows],
        marker="o",
        color="#a40000",
    )
    for row in rows:
        ax.annotate(
            f"α={row['alpha']:g}",
            (row["size_mbit"], row["total_mse"]),
            textcoords="offset points",
            xytext=(4, 4),
            fontsize=8,
        )
    ax.set_xlabel("size (Mbit)")
    ax.set_ylabel("total MSE")
    ax.set_yscale("log")
    ax.set_title("size/error trade-off")
    fig.tight_layout()
    path = outdir / "size_vs_mse.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(alphas, [row["total_bops"] for row in rows], marker="s", color="#4e9a06")
    ax.set_xlabel("alpha (% important layers)")
    ax.set_ylabel("total BOPs")
    ax.set_title("compute cost vs alpha")
    fig.tight_layout()
    path = outdir / "bops_vs_alpha.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
