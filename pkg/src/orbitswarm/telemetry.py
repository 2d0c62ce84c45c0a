"""CSV telemetry for a finished run.

Three files are written per run:

``robots.csv``   one row per recorded step and active robot
``pairs.csv``    one row per recorded step and tracked ordered pair
``summary.csv``  one row per recorded step with swarm-wide aggregates

Floats carry 17 significant digits so values survive a text round trip.
Aggregate columns of ``summary.csv`` cover every integration step since
the previous row, not just the recorded one.
"""

from __future__ import annotations

import csv
from pathlib import Path

ROBOT_COLUMNS = ("t", "id", "x", "y", "theta", "omega", "e")
PAIR_COLUMNS = ("t", "i", "j", "distance", "h", "psi", "lg_h_i", "stage")
SUMMARY_COLUMNS = ("t", "active", "min_pairwise_distance", "saturation_count", "singularity_count",
                   "inside_virtual_zone_count", "collision_count", "overtaking_pairs")
FILES = ("robots.csv", "pairs.csv", "summary.csv")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _robot_rows(records):
    for rec in records:
        t = fmt(rec.t)
        for k in range(len(rec.ids)):
            if rec.active[k]:
                yield (t, int(rec.ids[k]), fmt(rec.x[k]), fmt(rec.y[k]), fmt(rec.theta[k]),
                       fmt(rec.omega[k]), fmt(rec.e[k]))


def _pair_rows(records):
    for rec in records:
        t = fmt(rec.t)
        for k in range(len(rec.pair_i)):
            yield (t, int(rec.pair_i[k]), int(rec.pair_j[k]), fmt(rec.pair_dist[k]), fmt(rec.pair_h[k]),
                   fmt(rec.pair_psi[k]), fmt(rec.pair_lg_h_i[k]), int(rec.pair_stage[k]))


def _summary_rows(records):
    for rec in records:
        yield (fmt(rec.t), int(rec.active.sum()), fmt(rec.min_pairwise_distance), rec.saturation_count,
               rec.singularity_count, rec.inside_virtual_zone_count, rec.collision_count,
               int((rec.pair_stage > 0).sum()))


def emit_csv(records, out_dir, force: bool = False) -> list:
    """Write the three telemetry files into ``out_dir`` and return their paths.

    ``out_dir`` is created when missing.  Existing telemetry files are left
    alone (``FileExistsError``) unless ``force`` is set.
    """
    records = list(records)
    if not records:
        raise ValueError("emit_csv needs at least one record")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create output directory {out}: {exc.strerror}") from exc
    targets = [out / name for name in FILES]
    if not force:
        existing = [str(p) for p in targets if p.exists()]
        if existing:
            raise FileExistsError(f"refusing to overwrite {', '.join(existing)} (use --force)")
    tables = ((ROBOT_COLUMNS, _robot_rows), (PAIR_COLUMNS, _pair_rows), (SUMMARY_COLUMNS, _summary_rows))
    for path, (header, rows) in zip(targets, tables):
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows(records))
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return targets
