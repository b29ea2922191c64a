"""Deterministic report emission: JSON summaries, CSV traces, figures.

All numbers are written through ``repr`` (shortest round-trip), keys are
sorted, and newlines are fixed, so identical inputs yield byte-identical
JSON and CSV.  Figures are rendered from the same arrays that feed the CSV
files; matplotlib is imported lazily and only the Agg backend is used, so
the numerical core stays import-light.
"""

import json
from pathlib import Path

import numpy as np

SCHEMA = "pwhyp-report/1"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def write_json(path, payload):
    payload = dict(_clean(payload))
    payload["schema"] = SCHEMA
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")
    return Path(path)


def write_csv(path, header, columns):
    """Fixed-header CSV with repr-formatted numeric columns."""
    columns = [np.asarray(c) for c in columns]
    n = columns[0].shape[0]
    lines = [",".join(header)]
    for i in range(n):
        cells = []
        for c in columns:
            v = c[i]
            if isinstance(v, (np.floating, float)):
                cells.append(repr(float(v)))
            elif isinstance(v, (np.integer, int)):
                cells.append(str(int(v)))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def orbit_trace_csv(path, po, shadow_gaps=None):
    """Per-step trace: index, point, kick size, step bound, shadow gap."""
    n = np.arange(-po.K, po.K + 1)
    kicks = po.kicks if po.kicks is not None else np.zeros(2 * po.K + 1)
    bounds = np.concatenate([po.bounds_fwd, [np.nan]])
    gaps = shadow_gaps if shadow_gaps is not None else np.full(2 * po.K + 1, np.nan)
    return write_csv(
        path,
        ["n", "x_u", "x_v", "kick", "step_bound", "shadow_gap"],
        [n, po.window[:, 0], po.window[:, 1], kicks, bounds, gaps],
    )


def manifold_csv(path, manifold):
    return write_csv(
        path,
        ["v", "phi", "dphi"],
        [manifold.grid(), manifold.phi, manifold.dphi],
    )


def field_csv(path, fld):
    return write_csv(
        path,
        ["x_u", "x_v", "h_u", "h_v", "residual", "displacement", "q"],
        [
            fld.grid[:, 0],
            fld.grid[:, 1],
            fld.h[:, 0],
            fld.h[:, 1],
            fld.residual,
            fld.displacement,
            fld.q,
        ],
    )


# --- figures ---------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    fig.savefig(path, dpi=130)
    _pyplot().close(fig)
    return Path(path)


def shadow_figure(path, po, cert, shadow_gaps):
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    n = np.arange(-po.K, po.K + 1)
    axes[0].semilogy(n[:-1], np.maximum(po.gaps_fwd, 1e-18), ".", ms=3, label="step gap")
    axes[0].semilogy(n[:-1], po.bounds_fwd, "-", lw=1, label="bound")
    axes[0].set_xlabel("n")
    axes[0].set_ylabel("forward step gap")
    axes[0].legend(fontsize=8)
    axes[1].semilogy(n, np.maximum(shadow_gaps, 1e-18), ".", ms=3)
    axes[1].axhline(cert.q0, color="k", lw=0.8, label="Q(x0)")
    axes[1].set_xlabel("n")
    axes[1].set_ylabel("d(f^n shadow, x_n)")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def shadow_batch_figure(path, distances, q_over_50):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    d = np.maximum(np.asarray(distances), 1e-18)
    ax.hist(np.log10(d), bins=40, color="tab:blue", alpha=0.8)
    ax.axvline(np.log10(q_over_50), color="tab:red", lw=1.2, label="Q/50 certificate")
    ax.set_xlabel("log10 shadow distance")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def manifold_figure(path, manifold):
    plt = _pyplot()
    fig, axes = plt.subplots(2, 1, figsize=(5.5, 4.6), sharex=True)
    axes[0].plot(manifold.grid(), manifold.phi, lw=1)
    axes[0].set_ylabel("phi")
    axes[1].plot(manifold.grid(), manifold.dphi, lw=1)
    axes[1].set_ylabel("dphi")
    axes[1].set_xlabel("graph coordinate")
    fig.tight_layout()
    return _save(fig, path)


def expansivity_figure(path, indices, window):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    vals = [v for v in indices if v is not None]
    ax.hist(vals, bins=np.arange(-window - 0.5, window + 1.5), color="tab:green", alpha=0.85)
    ax.set_xlabel("first separation index")
    ax.set_ylabel("pairs")
    fig.tight_layout()
    return _save(fig, path)


def scales_figure(path, d, budget, radius):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    ax.loglog(d, budget, label="budget scale")
    ax.loglog(d, radius, label="chart radius")
    ax.set_xlabel("boundary distance")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def split_figure(path, points, splitting):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.quiver(
        points[:, 0], points[:, 1], splitting.e_u[:, 0], splitting.e_u[:, 1],
        color="tab:red", scale=30, width=0.003, label="unstable",
    )
    ax.quiver(
        points[:, 0], points[:, 1], splitting.e_s[:, 0], splitting.e_s[:, 1],
        color="tab:blue", scale=30, width=0.003, label="stable",
    )
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    return _save(fig, path)


def perturb_figure(path, points, ratio):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    sc = ax.scatter(points[:, 0], points[:, 1], c=ratio, s=8, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="realized gap / budget")
    ax.set_aspect("equal")
    fig.tight_layout()
    return _save(fig, path)


def conjugacy_figure(path, fld):
    plt = _pyplot()
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    res = fld.resolution
    full = fld.grid.shape[0] == res * res
    if full:
        disp = fld.displacement.reshape(res, res)
        resid = fld.residual.reshape(res, res)
        im0 = axes[0].imshow(disp.T, origin="lower", extent=(0, 1, 0, 1), cmap="magma")
        im1 = axes[1].imshow(
            np.log10(np.maximum(resid.T, 1e-18)), origin="lower", extent=(0, 1, 0, 1),
            cmap="viridis",
        )
        fig.colorbar(im0, ax=axes[0], label="displacement")
        fig.colorbar(im1, ax=axes[1], label="log10 residual")
    else:
        sc0 = axes[0].scatter(fld.grid[:, 0], fld.grid[:, 1], c=fld.displacement, s=8)
        sc1 = axes[1].scatter(
            fld.grid[:, 0], fld.grid[:, 1],
            c=np.log10(np.maximum(fld.residual, 1e-18)), s=8,
        )
        fig.colorbar(sc0, ax=axes[0], label="displacement")
        fig.colorbar(sc1, ax=axes[1], label="log10 residual")
    for ax in axes:
        ax.set_aspect("equal")
    fig.tight_layout()
    return _save(fig, path)
