"""CSV and manifest writers.

Numeric CSV payloads are formatted with 17 significant digits so identical
runs give byte-identical files; run metadata (timestamps, runtimes, library
versions) lives in the JSON manifest.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np


def _fmt(v):
    return format(float(v), ".17g")


def _write_lines(path, lines):
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def write_grid_function_csv(path, gf):
    lines = ["x_center,value"]
    lines += [f"{_fmt(x)},{_fmt(v)}" for x, v in zip(gf.x, gf.values)]
    return _write_lines(path, lines)


def write_estimator_csv(path, result):
    lines = ["x_center,mean,std"]
    std = result.std
    lines += [
        f"{_fmt(x)},{_fmt(m)},{_fmt(s)}"
        for x, m, s in zip(result.grid.centers, result.mean, std)
    ]
    return _write_lines(path, lines)


def write_table_csv(path, rows):
    lines = ["L,dxL,rms_percent,runtime_s,cell_updates"]
    lines += [
        f"{r.level},{_fmt(r.dx)},{_fmt(r.rms_percent)},{_fmt(r.runtime_s)},{r.cell_updates}"
        for r in rows
    ]
    return _write_lines(path, lines)


def manifest_payload(config_echo, **extras):
    import numba

    from . import __version__

    payload = {
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "versions": {
            "mlmcfv": __version__,
            "numpy": np.__version__,
            "numba": numba.__version__,
            "python": sys.version.split()[0],
        },
        "config": config_echo,
    }
    payload.update(extras)
    return payload


def write_manifest(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    return Path(path)
