"""Deterministic CSV/JSON emission and the run manifest."""

import hashlib
import json
from pathlib import Path

FLOAT_FMT = "{:.17g}"


def _fmt(v):
    if isinstance(v, float):
        return FLOAT_FMT.format(v)
    if isinstance(v, (int, bool)):
        return str(v)
    return str(v)


def write_csv(path, columns, meta=None):
    """Write columns (ordered name -> sequence) with a one-line '#' header.

    Floats use repr-faithful formatting so identical runs are byte-identical.
    """
    path = Path(path)
    names = list(columns)
    rows = zip(*[columns[n] for n in names])
    lines = []
    header = "# " + ", ".join(names)
    if meta:
        header += " | " + "; ".join(f"{k}={_fmt(v)}" for k, v in meta.items())
    lines.append(header)
    lines.append(",".join(names))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path, payload):
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    import numpy as np

    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def sha256_of(path):
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def build_manifest(scenario, config, checks, outputs, wall_clock_s, seed):
    """Manifest with config echo, per-check pass/fail, and hashed outputs."""
    import numpy
    import scipy

    from . import __version__

    return {
        "scenario": scenario,
        "config": config,
        "versions": {
            "semiphase": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
        "checks": [
            {
                "name": c["name"],
                "passed": bool(c["passed"]),
                "value": c.get("value"),
                "target": c.get("target"),
                "tolerance": c.get("tolerance"),
            }
            for c in checks
        ],
        "all_passed": all(c["passed"] for c in checks),
        "outputs": [{"path": str(p), "sha256": sha256_of(p)} for p in outputs],
        "wall_clock_s": wall_clock_s,
        "seed": seed,
    }
