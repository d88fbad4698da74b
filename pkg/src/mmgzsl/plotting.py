"""Report figures: training curves, the ablation H chart and a feature scatter.

Figures are rendered off-screen with the Agg backend and saved with empty
metadata, so identical inputs give identical PNG bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "mmgzsl",
}

# PNG text chunks; "Software" would otherwise embed the matplotlib version
_METADATA = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", metadata=_METADATA)
    plt.close(fig)
    return path


def plot_histories(histories: dict[str, dict[str, list[float]]], path: str | Path,
                   title: str = "training losses") -> Path:
    """One panel per stage; ``histories[stage][column]`` is a per-epoch series.

    A column named ``epoch`` supplies the x axis when present.
    """
    stages = [s for s in histories if histories[s]]
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, max(len(stages), 1), figsize=(4.2 * max(len(stages), 1), 3.2),
                                 squeeze=False)
        for ax, stage in zip(axes[0], stages):
            series = histories[stage]
            x = series.get("epoch")
            for name, values in series.items():
                if name == "epoch":
                    continue
                xs = x if x is not None else np.arange(len(values))
                ax.plot(xs, values, label=name, lw=1.2)
            ax.set_title(stage)
            ax.set_xlabel("epoch")
            ax.set_ylabel("loss")
            ax.legend(frameon=False)
        fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_ablation(labels: list[str], means: list[float], stds: list[float],
                  path: str | Path) -> Path:
    """Bar chart of the harmonic mean per method with one-stddev error bars."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(1.0 + 0.8 * len(labels), 3.2))
        pos = np.arange(len(labels))
        ax.bar(pos, means, yerr=stds, color="0.55", edgecolor="0.2", capsize=3)
        ax.set_xticks(pos)
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_ylabel("H (%)")
        ax.set_ylim(0, 100)
        ax.set_title("harmonic mean by method")
        fig.tight_layout()
        return _save(fig, path)


def pca_2d(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centering mean and top-2 principal directions (rows) of ``features``.

    Each direction's sign is fixed so its largest-magnitude entry is positive.
    """
    x = np.asarray(features, dtype=np.float64)
    mean = x.mean(axis=0)
    _, _, vt = np.linalg.svd(x - mean, full_matrices=False)
    comps = vt[:2].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return mean, comps


def plot_features(real: np.ndarray, real_classes, synthetic: np.ndarray, synthetic_classes,
                  path: str | Path, unseen=()) -> Path:
    """Real (dots) and synthetic (crosses) features projected on the real data's top-2 PCs."""
    mean, comps = pca_2d(real)
    pr = (np.asarray(real) - mean) @ comps.T
    ps = (np.asarray(synthetic) - mean) @ comps.T
    classes = sorted(set(np.asarray(real_classes).tolist()) | set(np.asarray(synthetic_classes).tolist()))
    cmap = plt.get_cmap("viridis", len(classes))
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.8, 4.0))
        for i, c in enumerate(classes):
            tag = " (unseen)" if c in set(unseen) else ""
            m = np.asarray(real_classes) == c
            if m.any():
                ax.scatter(pr[m, 0], pr[m, 1], s=6, color=cmap(i), alpha=0.5,
                           label=f"real {c}{tag}")
            m = np.asarray(synthetic_classes) == c
            if m.any():
                ax.scatter(ps[m, 0], ps[m, 1], s=10, color=cmap(i), marker="x", lw=0.7,
                           label=f"synthetic {c}{tag}")
        ax.set_xlabel("PC 1")
        ax.set_ylabel("PC 2")
        ax.legend(frameon=False, fontsize=6, ncol=2)
        fig.tight_layout()
        return _save(fig, path)
