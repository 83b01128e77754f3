"""PNG figures for the CLI report path (Agg backend, imported lazily)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_EXTENT = (0.0, 1.0, 0.0, 1.0)


def _save(fig, path):
    fig.savefig(path, dpi=110, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def _heat(ax, values, title, cmap="viridis"):
    im = ax.imshow(values.T, origin="lower", extent=_EXTENT, cmap=cmap)
    ax.set_title(title, fontsize=9)
    ax.set_xticks([])
    ax.set_yticks([])
    return im


def simulate_field(data, out):
    fields = data["fields"]
    fig, axes = plt.subplots(1, len(fields), figsize=(3.2 * len(fields), 3.2), squeeze=False)
    for ax, (t2, y) in zip(axes[0], fields):
        _heat(ax, y, f"theta2 = {t2:g}")
    return [_save(fig, out / "fields.png")]


def sample_plot(data, out):
    panels = data["panels"]
    k = len(panels)
    fig, axes = plt.subplots(1, k + 1, figsize=(3.2 * (k + 1), 3.4), squeeze=False)
    for ax, (name, xi, z, drawn) in zip(axes[0], panels):
        _heat(ax, z, f"z ({name}): xi1={xi.xi1:g}, xi2={xi.xi2:g}", cmap="magma")
        ax.scatter(drawn[:, 0], drawn[:, 1], s=6, c="cyan", edgecolors="none")
    _heat(axes[0, -1], data["y"], "signal y")
    paths = [_save(fig, out / "design_maps.png")]

    fig, axes = plt.subplots(1, k, figsize=(3.2 * k, 3.2), squeeze=False)
    for ax, (name, _, z, _) in zip(axes[0], panels):
        ax.scatter(z.reshape(-1), data["y_flat"], s=1, alpha=0.3)
        ax.set_xscale("log")
        ax.set_xlabel("z")
        ax.set_ylabel("y")
        ax.set_title(name, fontsize=9)
    paths.append(_save(fig, out / "y_vs_z.png"))
    return paths


def rho_curve(data, out):
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for yv, rows in data["curves"]:
        v = np.array([r["value"] for r in rows])
        rho = np.array([r["rho"] for r in rows])
        se = np.array([r["mc_se"] for r in rows])
        ax.plot(v, rho, label=f"y = {yv:g}")
        ax.fill_between(v, rho - 2 * se, rho + 2 * se, alpha=0.2)
    ax.axhline(1.0, color="grey", lw=0.8, ls=":")
    ax.set_xlabel(data["sweep"])
    ax.set_ylabel("rho")
    ax.legend(fontsize=8)
    return [_save(fig, out / "rho_curve.png")]


def rho_surface(data, out):
    yv = np.asarray(data["y_values"])
    surfaces = data["surfaces"]
    fig, axes = plt.subplots(1, len(surfaces), figsize=(3.4 * len(surfaces), 3.2), squeeze=False)
    for ax, (_, achieved, rho) in zip(axes[0], surfaces):
        cs = ax.contour(yv, yv, rho.T, levels=10)
        ax.clabel(cs, fontsize=6)
        ax.set_title(f"distance {achieved:.3f}", fontsize=9)
        ax.set_xlabel("y1")
        ax.set_ylabel("y2")
    return [_save(fig, out / "rho_surface.png")]


def variogram_study(data, out):
    rep = data["report"]
    edges = data["edges"]
    mids = 0.5 * (edges[1:] + edges[:-1])
    k = len(rep.designs)
    fig, axes = plt.subplots(2, k, figsize=(3.4 * k, 6.4), squeeze=False)
    for c, d in enumerate(rep.designs):
        ax = axes[0, c]
        dens, _ = np.histogram(np.clip(d.sample_values, edges[0], edges[-1]), edges, density=True)
        ax.plot(mids, data["pop_density"], "k-", label="population")
        ax.plot(mids, dens, "k:", label="samples")
        ax.set_title(d.name, fontsize=9)
        ax.legend(fontsize=7)
        ax = axes[1, c]
        ax.plot(rep.bin_centers, d.pooled_reference, "k-", label="population")
        ax.plot(rep.bin_centers, d.pooled_fitted, "k:", label="sample mean")
        ax.fill_between(
            rep.bin_centers, d.pooled_fitted - 3 * d.pooled_se, d.pooled_fitted + 3 * d.pooled_se,
            color="grey", alpha=0.3,
        )
        ax.set_xlabel("h")
        ax.legend(fontsize=7)
    return [_save(fig, out / "variogram_study.png")]


def likelihood_profile(data, out):
    rows = np.array(data["rows"], dtype=float)
    t1 = np.asarray(data["theta1"], dtype=float)
    t2 = np.asarray(data["theta2"], dtype=float)
    fig, axes = plt.subplots(1, 2, figsize=(7.5, 3.2))
    for ax, col, title in ((axes[0], 2, "naive"), (axes[1], 7, "full")):
        grid = rows[:, col].reshape(t1.size, t2.size)
        im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
        ax.set_xticks(range(t2.size), [f"{v:g}" for v in t2])
        ax.set_yticks(range(t1.size), [f"{v:g}" for v in t1])
        ax.set_xlabel("theta2")
        ax.set_ylabel("theta1")
        ax.set_title(f"{title} log-likelihood", fontsize=9)
        fig.colorbar(im, ax=ax)
    return [_save(fig, out / "likelihood_profile.png")]


_RENDERERS = {
    "simulate-field": simulate_field,
    "sample-plot": sample_plot,
    "rho-curve": rho_curve,
    "rho-surface": rho_surface,
    "variogram-study": variogram_study,
    "likelihood-profile": likelihood_profile,
}


def render(experiment, data, out):
    """Write the figures of one experiment; returns the written paths."""
    fn = _RENDERERS.get(experiment)
    if fn is None or data is None:
        return []
    return fn(data, out)
