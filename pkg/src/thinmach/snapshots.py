"""Snapshot persistence: flat binary fields plus a JSON sidecar manifest.

Binary layout: a 16-byte header of four little-endian uint32
(nx, ny, nz, nfields) followed by nfields blocks of little-endian float64,
each nx*ny*nz values in row-major order with x3 fastest.  The sidecar
``<stem>.json`` records time, epsilon, delta, the pressure-law parameters,
the scheme version and the field names.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .compressible import FluidState3D
from .grids import Grid3D, ScalarField3D, VectorField3D

__all__ = ["SCHEME_VERSION", "write_snapshot", "read_snapshot", "write_fluid_snapshot", "read_fluid_snapshot"]

SCHEME_VERSION = "rusanov-ssprk2-1"

_HEADER = struct.Struct("<4I")


def write_snapshot(path, arrays, field_names, manifest: dict):
    """Write named (nx, ny, nz) blocks and the JSON sidecar; returns both paths."""
    path = Path(path)
    arrays = [np.ascontiguousarray(a, dtype="<f8") for a in arrays]
    if len(arrays) != len(field_names):
        raise ValueError("one name per field block required")
    shape = arrays[0].shape
    if len(shape) != 3 or any(a.shape != shape for a in arrays):
        raise ValueError("all blocks must share one (nx, ny, nz) shape")
    bin_path = path.with_suffix(".bin")
    with open(bin_path, "wb") as fh:
        fh.write(_HEADER.pack(*shape, len(arrays)))
        for a in arrays:
            fh.write(a.tobytes(order="C"))
    sidecar = dict(manifest)
    sidecar["fields"] = list(field_names)
    sidecar["scheme_version"] = SCHEME_VERSION
    json_path = path.with_suffix(".json")
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return bin_path, json_path


def read_snapshot(path):
    """Read back (arrays, manifest) written by :func:`write_snapshot`."""
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text())
    with open(path.with_suffix(".bin"), "rb") as fh:
        nx, ny, nz, nfields = _HEADER.unpack(fh.read(_HEADER.size))
        count = nx * ny * nz
        arrays = [
            np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(nx, ny, nz).copy()
            for _ in range(nfields)
        ]
    return arrays, manifest


def write_fluid_snapshot(path, state: FluidState3D, epsilon, delta, law_params: dict):
    g = state.grid
    manifest = {
        "time": state.time,
        "epsilon": epsilon,
        "delta": delta,
        "law": dict(law_params),
        "grid": {"nx": g.nx, "ny": g.ny, "nz": g.nz, "L": g.L, "delta": g.delta},
    }
    arrays = [state.rho.values, state.mom.values[0], state.mom.values[1], state.mom.values[2]]
    return write_snapshot(path, arrays, ["rho", "m1", "m2", "m3"], manifest)


def read_fluid_snapshot(path):
    arrays, manifest = read_snapshot(path)
    if manifest["fields"] != ["rho", "m1", "m2", "m3"]:
        raise ValueError("not a fluid snapshot")
    g = manifest["grid"]
    grid = Grid3D(g["nx"], g["ny"], g["nz"], g["L"], g["delta"])
    state = FluidState3D(
        ScalarField3D(grid, arrays[0]),
        VectorField3D(grid, np.stack(arrays[1:4])),
        float(manifest["time"]),
    )
    return state, manifest
