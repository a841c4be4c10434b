"""Tabular and graphical output.

Every table goes out as UTF-8 CSV with a commented metadata header (config
hash, library version, RNG algorithm, seed) plus an optional JSON mirror;
both are deterministic so identical runs produce identical bytes.  Figures
are rendered headlessly next to the tables.
"""

import csv
import json
import os

import numpy as np

SCHEMA_VERSION = 1


def _plain(value):
    """Builtin scalar for a possibly-numpy cell value."""
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def _fmt(value):
    value = _plain(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, columns, rows, meta):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path, columns, rows, meta):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "meta": dict(meta),
        "columns": list(columns),
        "rows": [[_plain(v) for v in row] for row in rows],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_table(outdir, stem, columns, rows, meta, json_mirror=True):
    """Write <stem>.csv (and mirror) into outdir; returns the paths written."""
    os.makedirs(outdir, exist_ok=True)
    paths = [os.path.join(outdir, stem + ".csv")]
    write_csv(paths[0], columns, rows, meta)
    if json_mirror:
        paths.append(os.path.join(outdir, stem + ".json"))
        write_json(paths[-1], columns, rows, meta)
    return paths


def base_meta(subcommand, cfg, seed, **extra):
    from .trajectory import RNG_ALGORITHM

    meta = {
        "schema_version": SCHEMA_VERSION,
        "subcommand": subcommand,
        "config_sha256": cfg.sha256,
        "version": _package_version(),
        "rng_algorithm": RNG_ALGORITHM,
        "seed": seed,
    }
    meta.update(extra)
    return meta


def _package_version():
    from . import __version__

    return __version__


def _axes(path):
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 3.7))
    return plt, fig, ax


def _finish(plt, fig, ax, path, xlabel, ylabel):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_line_figure(path, x, curves, xlabel, ylabel, scatter=False):
    """Plot named curves over a shared abscissa and write a PNG."""
    plt, fig, ax = _axes(path)
    style = {"linestyle": "none", "marker": "o", "ms": 4} if scatter else {}
    for label, y in curves.items():
        ax.plot(x, y, label=label, **style)
    if len(curves) > 1:
        ax.legend(frameon=False)
    _finish(plt, fig, ax, path, xlabel, ylabel)


def save_stem_figure(path, n, probs, xlabel, ylabel):
    """Discrete distribution as a stem plot."""
    plt, fig, ax = _axes(path)
    ax.stem(n, probs, basefmt=" ")
    _finish(plt, fig, ax, path, xlabel, ylabel)


def save_click_figure(path, clicks, t_end, xlabel):
    """Raster of detector clicks: one lane per branch, detected marked solid."""
    plt, fig, ax = _axes(path)
    lanes = {"down": 0.0, "up": 1.0}
    for branch, lane in lanes.items():
        hits = [c.time for c in clicks if c.branch == branch and c.detected]
        missed = [c.time for c in clicks if c.branch == branch and not c.detected]
        ax.eventplot(missed, lineoffsets=lane, colors="0.8", linelengths=0.6)
        ax.eventplot(hits, lineoffsets=lane, colors="C0", linelengths=0.8)
    ax.set_xlim(0.0, t_end)
    ax.set_yticks(list(lanes.values()), list(lanes.keys()))
    _finish(plt, fig, ax, path, xlabel, "detector")
