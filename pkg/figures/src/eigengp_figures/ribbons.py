"""Ribbon plots: posterior means with pointwise credible bands.

Input is the grid-mode replicates.csv written by `eigengp run` (columns
series,m,x,mean,variance,lower,upper,truth).  Each series becomes one
ribbon; the truth column is overlaid once as a dashed black line.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import SchemaError

GRID_COLUMNS = ("series", "m", "x", "mean", "variance", "lower", "upper", "truth")

_COLORS = ("#d62728", "#2ca02c", "#1f77b4", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class RibbonSeries:
    """One labeled posterior curve with its pointwise band."""

    label: str
    m: int
    x: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        if not (np.all(self.lower <= self.mean) and np.all(self.mean <= self.upper)):
            raise SchemaError(f"series {self.label!r}: band must satisfy "
                              "lower <= mean <= upper pointwise")


@dataclass(frozen=True)
class GridSpec:
    """Presentation options for the ribbon plot."""

    series_order: Optional[Sequence[str]] = None
    title: Optional[str] = None
    figsize: tuple = (8.0, 5.0)
    dpi: int = 150
    band_alpha: float = 0.25


def load_grid_csv(path: str):
    """Parse a grid-mode CSV into (series dict, truth curve)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in GRID_COLUMNS if c not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing columns {missing}; expected schema "
                f"{','.join(GRID_COLUMNS)}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows; expected schema {','.join(GRID_COLUMNS)}")

    grouped: Dict[str, Dict[str, list]] = {}
    truth_points: Dict[float, float] = {}
    for i, row in enumerate(rows, start=2):
        try:
            x = float(row["x"])
            bundle = grouped.setdefault(row["series"], {"m": int(float(row["m"])),
                                                        "x": [], "mean": [],
                                                        "lower": [], "upper": []})
            bundle["x"].append(x)
            bundle["mean"].append(float(row["mean"]))
            bundle["lower"].append(float(row["lower"]))
            bundle["upper"].append(float(row["upper"]))
            truth_points[x] = float(row["truth"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: row {i}: {exc}")

    series = {}
    for label, bundle in grouped.items():
        order = np.argsort(np.asarray(bundle["x"]))
        series[label] = RibbonSeries(
            label=label, m=bundle["m"],
            x=np.asarray(bundle["x"])[order],
            mean=np.asarray(bundle["mean"])[order],
            lower=np.asarray(bundle["lower"])[order],
            upper=np.asarray(bundle["upper"])[order])
    xs = np.array(sorted(truth_points))
    truth = np.array([truth_points[x] for x in xs])
    return series, (xs, truth)


def band_area(series: RibbonSeries) -> float:
    """Integrated band width over the grid (trapezoid rule)."""
    return float(np.trapezoid(series.upper - series.lower, series.x))


def plot_ribbons(replicates_path: str, grid_spec: Optional[GridSpec],
                 out_image_path: str) -> List[str]:
    """Render one ribbon per series plus the truth; returns plotted labels.

    Output is deterministic: identical input CSV yields identical image
    bytes (volatile metadata is stripped).
    """
    spec = grid_spec or GridSpec()
    series, (tx, tv) = load_grid_csv(replicates_path)
    labels = list(spec.series_order) if spec.series_order else sorted(
        series, key=lambda lab: -series[lab].m)
    unknown = [lab for lab in labels if lab not in series]
    if unknown:
        raise SchemaError(f"requested series not in file: {unknown}; "
                          f"available: {sorted(series)}")

    fig, ax = plt.subplots(figsize=spec.figsize)
    for color, label in zip(_COLORS * (1 + len(labels) // len(_COLORS)), labels):
        s = series[label]
        ax.fill_between(s.x, s.lower, s.upper, color=color, alpha=spec.band_alpha,
                        linewidth=0)
        ax.plot(s.x, s.mean, color=color, linewidth=1.2, label=f"{label} (m={s.m})")
    ax.plot(tx, tv, color="black", linestyle="--", linewidth=1.2, label="truth")
    ax.set_xlabel("x")
    ax.set_ylabel("posterior mean and band")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="best")
    fig.tight_layout()

    out = Path(out_image_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if out.suffix == ".svg" else {"Software": None}
    fig.savefig(out, dpi=spec.dpi, metadata=metadata)
    plt.close(fig)
    return labels


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot-ribbons",
        description="Render posterior ribbon plots from grid-mode replicates.csv")
    parser.add_argument("--in", dest="in_path", required=True,
                        help="grid-mode replicates.csv")
    parser.add_argument("--out", dest="out_path", required=True,
                        help="output image (.png or .svg)")
    parser.add_argument("--series", default=None,
                        help="comma-separated series order (default: by m, descending width)")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    order = args.series.split(",") if args.series else None
    try:
        plot_ribbons(args.in_path, GridSpec(series_order=order, title=args.title),
                     args.out_path)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", flush=True)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
