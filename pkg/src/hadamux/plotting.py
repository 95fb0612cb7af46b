"""Headless figure rendering for sweep reports."""

from __future__ import annotations

from matplotlib.figure import Figure

__all__ = ["render_mean_vs_k", "render_row_scatter", "render_example_spectra"]

METHOD_STYLE = {
    "slit": dict(color="#777777", marker="s"),
    "hts": dict(color="#1f77b4", marker="o"),
    "snapshot": dict(color="#d62728", marker="^"),
    "mms": dict(color="#2ca02c", marker="x"),
}
DPI = 150


def _style(method: str) -> dict:
    return METHOD_STYLE.get(method, dict(color="black", marker="."))


def render_mean_vs_k(series: dict[str, list[tuple[float, float]]], path) -> None:
    """Mean SNR vs disturbance factor, one line per method."""
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.add_subplot(1, 1, 1)
    for method, points in series.items():
        if not points:
            continue
        ks, means = zip(*points)
        ax.plot(ks, means, label=method, lw=1.4, ms=3, **_style(method))
    ax.set_xlabel("disturbance factor k")
    ax.set_ylabel("mean SNR (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.savefig(path, dpi=DPI, bbox_inches="tight")


def render_row_scatter(per_k: dict[float, dict[str, list[tuple[int, float]]]], path) -> None:
    """Per-row SNR scatter at the reporting k values, one panel per k."""
    ks = sorted(per_k)
    fig = Figure(figsize=(6.4 * max(1, len(ks)) / 1.6, 4.2))
    for i, k in enumerate(ks, start=1):
        ax = fig.add_subplot(1, max(1, len(ks)), i)
        for method, points in per_k[k].items():
            if not points:
                continue
            rows, snrs = zip(*points)
            style = _style(method)
            ax.scatter(rows, snrs, s=6, label=method, color=style["color"], marker=style["marker"], alpha=0.7)
        ax.set_title(f"k = {k:g}")
        ax.set_xlabel("row index")
        ax.set_ylabel("SNR (dB)")
        ax.grid(True, alpha=0.3)
        if i == 1:
            ax.legend(markerscale=2)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")


def render_example_spectra(examples: list[dict], path) -> None:
    """Truth vs reconstructed spectra, one panel per captured k."""
    examples = sorted(examples, key=lambda e: e["k"])
    count = max(1, len(examples))
    fig = Figure(figsize=(6.4, 3.0 * count))
    for i, ex in enumerate(examples, start=1):
        ax = fig.add_subplot(count, 1, i)
        channels = range(len(ex["truth"]))
        ax.plot(channels, ex["truth"], color="black", lw=1.6, label="truth")
        for method, spectrum in ex["spectra"].items():
            ax.plot(channels, spectrum, lw=0.9, alpha=0.85, label=method, color=_style(method)["color"])
        ax.set_title(f"k = {ex['k']:g}")
        ax.set_xlabel("channel")
        ax.set_ylabel("radiance")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8, ncol=2)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
