"""Fixed-width comparison tables from results.csv.

Each table layout is a list of blocks (design kind, n, alpha, gamma); every
block shows one row per kernel with paired sparse/full columns for
coverage, interval length, RMSE and NLPD, with (sd) parentheticals where
the dispersion is nonzero.  A results row with m equal to n is the full
posterior; any other m is the sparse one.

Layouts: table1 is the headline d=1 comparison (fixed n=1000 at alpha 1.0
and 0.5, uniform n=500 at alpha 1.0 and 0.3).  table2 covers the d=10
equicorrelated-Gaussian designs (n=1000 and 2000), table3 the 2-smooth
truth on the fixed design, table4 semi-synthetic external features.
"generic" renders whatever blocks appear in the file.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import SchemaError

RESULTS_COLUMNS = ("n", "d", "alpha", "gamma", "kernel", "design", "m", "delta",
                   "coverage", "length_mean", "length_sd", "rmse",
                   "nlpd_mean", "nlpd_sd", "seed")

_DESIGN_TITLES = {
    "regular_grid": "Fixed design",
    "uniform": "Random design",
    "gaussian": "Gaussian design",
    "external": "Semi-synthetic design",
}

_KERNEL_LABELS = {"rbm": "rBM", "matern": "Matern", "se": "SE"}


@dataclass(frozen=True)
class TableBlock:
    design: str
    n: int
    alpha: float
    gamma: float

    @property
    def title(self) -> str:
        name = _DESIGN_TITLES.get(self.design, self.design)
        return (f"{name}: n = {self.n}, "
                f"(alpha, gamma) = ({self.alpha:g}, {self.gamma:g})")


LAYOUTS: Dict[str, Tuple[Tuple[TableBlock, ...], Tuple[str, ...]]] = {
    "table1": ((TableBlock("regular_grid", 1000, 1.0, 0.5),
                TableBlock("regular_grid", 1000, 0.5, 0.5),
                TableBlock("uniform", 500, 1.0, 0.5),
                TableBlock("uniform", 500, 0.3, 0.5)),
               ("rbm", "matern", "se")),
    "table2": ((TableBlock("gaussian", 1000, 1.0, 0.5),
                TableBlock("gaussian", 2000, 1.0, 0.5)),
               ("matern", "se")),
    "table3": ((TableBlock("regular_grid", 1000, 2.0, 0.5),),
               ("rbm", "matern", "se")),
    "table4": ((TableBlock("external", 1000, 1.0, 0.5),),
               ("matern", "se")),
}


def load_results_csv(path: str) -> List[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in RESULTS_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}; expected schema "
                              f"{','.join(RESULTS_COLUMNS)}")
        rows = []
        for i, raw in enumerate(reader, start=2):
            try:
                rows.append({
                    "n": int(raw["n"]), "d": int(raw["d"]),
                    "alpha": float(raw["alpha"]), "gamma": float(raw["gamma"]),
                    "kernel": raw["kernel"], "design": raw["design"],
                    "m": int(raw["m"]), "delta": float(raw["delta"]),
                    "coverage": float(raw["coverage"]),
                    "length_mean": float(raw["length_mean"]),
                    "length_sd": float(raw["length_sd"]),
                    "rmse": float(raw["rmse"]),
                    "nlpd_mean": float(raw["nlpd_mean"]),
                    "nlpd_sd": float(raw["nlpd_sd"]),
                })
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: row {i}: {exc}")
    if not rows:
        raise SchemaError(f"{path}: no data rows; expected schema "
                          f"{','.join(RESULTS_COLUMNS)}")
    return rows


def _value(mean: float, sd: float) -> str:
    if sd >= 0.005:
        return f"{mean:.2f} ({sd:.2f})"
    return f"{mean:.2f}"


def _block_rows(rows: List[dict], block: TableBlock, kernels: Sequence[str]) -> List[List[str]]:
    out = []
    for kernel in kernels:
        cell = [r for r in rows
                if r["design"] == block.design and r["n"] == block.n
                and r["alpha"] == block.alpha and r["gamma"] == block.gamma
                and r["kernel"] == kernel]
        sparse = [r for r in cell if r["m"] < r["n"]]
        full = [r for r in cell if r["m"] == r["n"]]
        if not sparse or not full:
            raise SchemaError(
                f"missing (kernel, alpha, gamma) = ({kernel}, {block.alpha:g}, "
                f"{block.gamma:g}) for block {block.title!r}: need both a sparse "
                "(m < n) and a full (m = n) row")
        s, f = sparse[0], full[0]
        out.append([
            _KERNEL_LABELS.get(kernel, kernel),
            f"{s['coverage']:.2f}", f"{f['coverage']:.2f}",
            _value(s["length_mean"], s["length_sd"]),
            _value(f["length_mean"], f["length_sd"]),
            f"{s['rmse']:.2f}", f"{f['rmse']:.2f}",
            _value(s["nlpd_mean"], s["nlpd_sd"]),
            _value(f["nlpd_mean"], f["nlpd_sd"]),
        ])
    return out


def _render_block(block_title: str, body: List[List[str]]) -> List[str]:
    header1 = ["Prior", "Coverage", "", "Length", "", "RMSE", "", "NLPD", ""]
    header2 = ["", "SGPR", "GP", "SGPR", "GP", "SGPR", "GP", "SGPR", "GP"]
    table = [header1, header2] + body
    widths = [max(len(row[c]) for row in table) for c in range(len(header1))]
    lines = [block_title]
    for row in table:
        cells = [row[0].ljust(widths[0])]
        cells += [row[c].rjust(widths[c]) for c in range(1, len(row))]
        lines.append("  ".join(cells).rstrip())
    return lines


def _generic_blocks(rows: List[dict]):
    seen = []
    for r in rows:
        block = TableBlock(r["design"], r["n"], r["alpha"], r["gamma"])
        if block not in seen:
            seen.append(block)
    for block in seen:
        kernels = []
        for r in rows:
            if (r["design"], r["n"], r["alpha"], r["gamma"]) == \
                    (block.design, block.n, block.alpha, block.gamma) \
                    and r["kernel"] not in kernels:
                kernels.append(r["kernel"])
        yield block, tuple(kernels)


def _generic_render(rows: List[dict]) -> List[str]:
    # passthrough mode: no SGPR/GP pairing requirement, one line per row
    header = ["Prior", "m", "Coverage", "Length", "RMSE", "NLPD"]
    lines = []
    for block, kernels in _generic_blocks(rows):
        body = []
        for r in rows:
            if (r["design"], r["n"], r["alpha"], r["gamma"]) != \
                    (block.design, block.n, block.alpha, block.gamma):
                continue
            body.append([
                _KERNEL_LABELS.get(r["kernel"], r["kernel"]), str(r["m"]),
                f"{r['coverage']:.2f}",
                _value(r["length_mean"], r["length_sd"]),
                f"{r['rmse']:.2f}",
                _value(r["nlpd_mean"], r["nlpd_sd"]),
            ])
        table = [header] + body
        widths = [max(len(row[c]) for row in table) for c in range(len(header))]
        lines.append(block.title)
        for row in table:
            cells = [row[0].ljust(widths[0])]
            cells += [row[c].rjust(widths[c]) for c in range(1, len(row))]
            lines.append("  ".join(cells).rstrip())
        lines.append("")
    return lines[:-1] if lines else lines


def render_table(results_path: str, layout: Optional[str],
                 out_path: Optional[str] = None) -> str:
    """Format results.csv as a fixed-width text table; returns the text."""
    rows = load_results_csv(results_path)
    if layout in (None, "generic"):
        lines = _generic_render(rows)
    else:
        if layout not in LAYOUTS:
            raise SchemaError(f"unknown layout {layout!r}; choose one of "
                              f"{sorted(LAYOUTS)} or generic")
        blocks, kernels = LAYOUTS[layout]
        lines = []
        for block in blocks:
            lines.extend(_render_block(block.title, _block_rows(rows, block, kernels)))
            lines.append("")
        lines = lines[:-1]
    text = "\n".join(lines) + "\n"
    if out_path is not None:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    return text


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="render-table",
        description="Format eigengp results.csv into a comparison table")
    parser.add_argument("--in", dest="in_path", required=True, help="results.csv")
    parser.add_argument("--layout", default="generic",
                        choices=sorted(LAYOUTS) + ["generic"])
    parser.add_argument("--out", dest="out_path", required=True, help="output text file")
    args = parser.parse_args(argv)
    try:
        render_table(args.in_path, args.layout, args.out_path)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", flush=True)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
