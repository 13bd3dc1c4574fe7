"""Line charts written as reproducible SVG files."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp make repeated renders byte-identical
RC = {
    "svg.hashsalt": "svesim",
    "svg.fonttype": "none",
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def line_chart(path, x, series, xlabel="t", ylabel="", title=None, bands=None, logx=False, logy=False):
    """Plot named series against ``x``; ``bands`` maps a name to a half-width for a shaded band."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for name, y in series.items():
            y = np.asarray(y, dtype=float)
            ax.plot(x, y, lw=1.2, label=name, marker="o" if len(x) <= 12 else None, ms=3)
            if bands and name in bands:
                hw = np.asarray(bands[name], dtype=float)
                ax.fill_between(x, y - hw, y + hw, alpha=0.2, lw=0)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)
