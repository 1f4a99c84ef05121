"""Figures written next to CLI reports."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.patches as patches  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no creation date / version stamp so reruns give identical files
SAVE_KW = {"dpi": 100, "metadata": {"Software": None}}


def plot_spatial_spectrum(spectrum, peaks, path, truth=None):
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    p = np.asarray(spectrum.power)
    ax.plot(spectrum.azimuths, 10 * np.log10(p / p.max()), lw=1.2, color="k")
    for az in peaks:
        ax.axvline(az, color="tab:red", ls="--", lw=1)
    for az in truth or ():
        ax.axvline(az, color="tab:green", ls=":", lw=1)
    ax.set_xlim(0, 360)
    ax.set_xlabel("Azimuth [deg]")
    ax.set_ylabel("MUSIC pseudospectrum [dB]")
    ax.set_title(f"band {spectrum.band[0]:.0f}-{spectrum.band[1]:.0f} Hz")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **SAVE_KW)
    plt.close(fig)


def plot_confusion(table, path):
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    x = np.arange(1, table.n_classes + 1)
    ax.bar(x, table.true, color="tab:blue", label="True")
    ax.bar(x, table.false, bottom=table.true, color="tab:red", label="False")
    ax.set_xticks(x)
    ax.set_xlabel("Object number")
    ax.set_ylabel("Trials")
    ax.set_title(f"Accuracy rate {table.accuracy_display} %")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, **SAVE_KW)
    plt.close(fig)


def plot_candidates(image, candidates, path, class_names=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.imshow(image)
    for i, c in enumerate(candidates):
        u0, v0, u1, v1 = c.roi
        ax.add_patch(patches.Rectangle((u0 - 0.5, v0 - 0.5), u1 - u0 + 1, v1 - v0 + 1,
                                       fill=False, ec="yellow", lw=1.5))
        text = f"#{i}"
        if c.label is not None:
            name = class_names[c.label] if class_names else str(c.label)
            text += f" {name} {c.score:.2f}"
        ax.text(u0, v0 - 3, text, color="yellow", fontsize=8, va="bottom")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, **SAVE_KW)
    plt.close(fig)
