"""Run manifests and bit-stable JSON/CSV emission."""
from __future__ import annotations

import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__


@dataclass
class RunManifest:
    command: list
    config_hash: str = ""
    seed: int = 0
    version: str = __version__
    started: str = field(default_factory=lambda: _now())
    finished: str = ""
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_config(cls, command, cfg):
        return cls(command=list(command), config_hash=cfg.hash(), seed=int(cfg.seed),
                   tolerances={"tol": cfg.tol, "eps_active_rel": cfg.eps_active_rel})

    def finish(self):
        self.finished = _now()
        return self

    def to_dict(self):
        return asdict(self)


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(obj) -> str:
    # repr-based floats round-trip doubles exactly
    return json.dumps(obj, default=_default, indent=2, sort_keys=True)


def write_json(path, payload: dict, manifest: RunManifest = None):
    doc = dict(payload)
    if manifest is not None:
        doc["manifest"] = manifest.to_dict()
    Path(path).write_text(dumps(doc) + "\n")


def write_csv(path, rows: list, columns: list, manifest: RunManifest = None):
    with open(path, "w", newline="") as fh:
        if manifest is not None:
            fh.write("# manifest: " + json.dumps(manifest.to_dict(), sort_keys=True) + "\n")
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r.get(k, "")) for k in columns})


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def read_csv(path) -> list:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def print_table(rows, columns, out=sys.stdout):
    widths = {c: max(len(c), *(len(_fmt(r.get(c, ""))) for r in rows)) if rows else len(c)
              for c in columns}
    out.write("  ".join(c.rjust(widths[c]) for c in columns) + "\n")
    for r in rows:
        out.write("  ".join(_fmt(r.get(c, "")).rjust(widths[c]) for c in columns) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.6g}"
    return str(v)
