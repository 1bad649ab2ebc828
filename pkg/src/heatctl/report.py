"""Report records, CSV/JSON serialization and plain-text rendering."""
import csv
import datetime as _dt
import json
import os
import platform
from dataclasses import dataclass, field

import numpy as np

CSV_COLUMNS = ("delta", "T_gap", "ctrl_err_min_norm", "norm_gap", "family_err", "in_A", "k")


def verdict(name, bound, measured, passed, **extra):
    out = {"name": name, "bound": _plain(bound), "measured": _plain(measured), "pass": bool(passed)}
    out.update({k: _plain(v) for k, v in extra.items()})
    return out


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


@dataclass
class Report:
    meta: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)

    @property
    def passed(self):
        return all(v["pass"] for v in self.verdicts)

    def to_json(self):
        return json.dumps(
            {"meta": _plain(self.meta), "rows": _plain(self.rows), "fits": _plain(self.fits),
             "verdicts": _plain(self.verdicts)},
            indent=2,
            sort_keys=False,
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(data.get("meta", {}), data.get("rows", []), data.get("fits", {}), data.get("verdicts", []))


def metadata(command, config_tree, timestamp=True):
    import numba
    import scipy

    from . import __version__, _kernels

    meta = {
        "command": command,
        "config": config_tree,
        "versions": {
            "heatctl": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
            "python": platform.python_version(),
        },
        "backend": _kernels.BACKEND,
    }
    if timestamp:
        meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return meta


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])


def write_outputs(report, out_dir, stem, rows=None):
    os.makedirs(out_dir, exist_ok=True)
    paths = {"json": os.path.join(out_dir, f"{stem}.json")}
    with open(paths["json"], "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    if rows is not None:
        paths["csv"] = os.path.join(out_dir, f"{stem}.csv")
        write_csv(paths["csv"], rows)
    return paths


def render_text(report):
    lines = []
    meta = report.meta
    lines.append(f"heatctl report: {meta.get('command', '?')}")
    if "timestamp" in meta:
        lines.append(f"  generated {meta['timestamp']}")
    for k, v in meta.get("results", {}).items():
        lines.append(f"  {k} = {v}")
    if report.rows:
        lines.append(f"rows: {len(report.rows)}")
        lines.append("  " + "  ".join(f"{c:>12}" for c in CSV_COLUMNS))
        for row in report.rows:
            cells = []
            for c in CSV_COLUMNS:
                v = row.get(c)
                if v is None:
                    cells.append(f"{'-':>12}")
                elif isinstance(v, bool):
                    cells.append(f"{str(v):>12}")
                elif isinstance(v, int):
                    cells.append(f"{v:>12d}")
                else:
                    cells.append(f"{v:>12.4e}")
            lines.append("  " + "  ".join(cells))
    if report.fits:
        lines.append("fits:")
        for name, fit in report.fits.items():
            lines.append(f"  {name}: slope={fit['slope']:.4f} R2={fit['r2']:.5f} (n={fit.get('n', '?')})")
    if report.verdicts:
        lines.append("verdicts:")
        for v in report.verdicts:
            tag = "PASS" if v["pass"] else "FAIL"
            lines.append(f"  [{tag}] {v['name']}: measured={v['measured']} bound={v['bound']}")
    return "\n".join(lines) + "\n"
