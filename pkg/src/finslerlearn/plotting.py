"""Static SVG scatter plots of embeddings."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "finslerlearn"


def _colors(values, color_by):
    if values is None or color_by == "none":
        return {"color": "tab:blue"}
    values = np.asarray(values)
    if color_by == "labels":
        _, codes = np.unique(values, return_inverse=True)
        cmap = plt.get_cmap("tab10" if codes.max() < 10 else "tab20")
        return {"c": codes % cmap.N, "cmap": cmap, "vmin": 0, "vmax": cmap.N - 1}
    return {"c": values, "cmap": "viridis"}


def plot_embedding(coords, out_path, labels=None, color_by="labels", omega_axis=-1, title=None):
    """Write a scatter SVG.

    3-D coordinates give two panels: the view along the asymmetry axis
    (the two remaining axes) and a side view with the asymmetry axis
    vertical. ``color_by`` is ``labels``, ``z`` (asymmetry coordinate)
    or ``none``.
    """
    y = np.asarray(coords, dtype=np.float64)
    m = y.shape[1]
    axis = omega_axis % m
    values = labels
    if color_by == "z":
        values = y[:, axis]
    style = _colors(values, color_by)
    if m == 3:
        fig, (top, side) = plt.subplots(1, 2, figsize=(10, 4.8))
        rest = [t for t in range(3) if t != axis]
        top.scatter(y[:, rest[0]], y[:, rest[1]], s=8, **style)
        top.set_title("top view (asymmetry axis out of plane)")
        top.set_aspect("equal", adjustable="datalim")
        side.scatter(y[:, rest[0]], y[:, axis], s=8, **style)
        side.set_title("side view")
        side.set_ylabel("asymmetry axis")
    else:
        fig, ax = plt.subplots(figsize=(5.5, 5))
        if m == 1:
            ax.scatter(np.arange(len(y)), y[:, 0], s=8, **style)
        else:
            ax.scatter(y[:, 0], y[:, 1], s=8, **style)
            ax.set_aspect("equal", adjustable="datalim")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
