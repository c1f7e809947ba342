import os
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

import numpy as np

from solver.errors import SchemaError
from solver.model import State
from solver.spectral_core import GridSpec, ScalarField, SymTensorField2, VectorField2

logger = logging.getLogger(__name__)

HEADER_END = "end_header"
STATE_COMPONENTS = ["u1", "u2", "t11", "t12", "t22"]
_DTYPES = {"real": "<f8", "spectral": "<c16"}


@dataclass(frozen=True, eq=False)
class Snapshot:
    grid: GridSpec
    t: float
    fields: Dict[str, ScalarField]

    def to_state(self) -> State:
        missing = [c for c in STATE_COMPONENTS if c not in self.fields]
        if missing:
            raise SchemaError(f"snapshot lacks state components {missing}")
        f = self.fields
        return State(self.t, VectorField2(f["u1"], f["u2"]), SymTensorField2(f["t11"], f["t12"], f["t22"]))


def write_snapshot(path: str, fields: Dict[str, ScalarField], t: float = 0.0) -> str:
    """
    Writes named scalar fields as a text header followed by raw little-endian
    float64 data, one n x n row-major block per component. Spectral fields are
    stored as interleaved (re, im) pairs.
    """
    if not fields:
        raise SchemaError("write_snapshot needs at least one field")
    first = next(iter(fields.values()))
    grid, spectral = first.grid, first.spectral
    for name, f in fields.items():
        if f.grid != grid or f.spectral != spectral:
            raise SchemaError(f"field '{name}' does not share the grid and representation of the others")
        if "," in name or "=" in name:
            raise SchemaError(f"field name '{name}' may not contain ',' or '='")
    representation = "spectral" if spectral else "real"
    header = [
        f"n={grid.n}",
        f"L={grid.box_length!r}",
        f"dealias_fraction={grid.dealias_fraction!r}",
        f"representation={representation}",
        f"components={','.join(fields)}",
        "endianness=little",
        f"t={float(t)!r}",
        HEADER_END,
    ]
    dtype = _DTYPES[representation]
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        for f in fields.values():
            fh.write(np.ascontiguousarray(f.data, dtype=dtype).tobytes(order="C"))
    logger.debug(f"Snapshot with {len(fields)} components written to {path}")
    return path


def write_state(path: str, state: State, spectral: bool = False) -> str:
    state = state.as_spectral() if spectral else state.as_real()
    comps = (*state.u.components(), *state.tau.components())
    return write_snapshot(path, dict(zip(STATE_COMPONENTS, comps)), state.t)


def _parse_header(fh) -> Dict[str, str]:
    header: Dict[str, str] = {}
    while True:
        line = fh.readline()
        if not line:
            raise SchemaError("snapshot header is not terminated by 'end_header'")
        text = line.decode("ascii", errors="replace").strip()
        if text == HEADER_END:
            return header
        if "=" not in text:
            raise SchemaError(f"malformed snapshot header line: '{text}'")
        key, value = text.split("=", 1)
        header[key.strip()] = value.strip()


def read_snapshot(path: str) -> Snapshot:
    """Reads a file written by write_snapshot."""
    logger.debug(f"Reading snapshot {path}")
    with open(path, "rb") as fh:
        header = _parse_header(fh)
        payload = fh.read()
    required = ["n", "L", "representation", "components", "endianness"]
    missing = [k for k in required if k not in header]
    if missing:
        raise SchemaError(f"snapshot header of {path} lacks keys {missing}")
    if header["endianness"] != "little":
        raise SchemaError(f"unsupported endianness '{header['endianness']}' in {path}")
    representation = header["representation"]
    if representation not in _DTYPES:
        raise SchemaError(f"unknown representation '{representation}' in {path}")
    try:
        grid = GridSpec(
            n=int(header["n"]),
            box_length=float(header["L"]),
            dealias_fraction=float(header.get("dealias_fraction", 2.0 / 3.0)),
        )
    except ValueError as e:
        raise SchemaError(f"invalid grid in snapshot header of {path}: {e}") from e
    names: List[str] = [c for c in header["components"].split(",") if c]
    dtype = np.dtype(_DTYPES[representation])
    block = grid.n * grid.n * dtype.itemsize
    if len(payload) != block * len(names):
        raise SchemaError(
            f"snapshot {path} holds {len(payload)} data bytes, header implies {block * len(names)}"
        )
    spectral = representation == "spectral"
    fields = {}
    for i, name in enumerate(names):
        data = np.frombuffer(payload, dtype=dtype, count=grid.n * grid.n, offset=i * block)
        fields[name] = ScalarField(grid, data.reshape(grid.n, grid.n).astype(complex if spectral else float), spectral)
    return Snapshot(grid, float(header.get("t", 0.0)), fields)


def read_state(path: str) -> State:
    return read_snapshot(path).to_state()


def snapshot_tensor(snapshot: Snapshot, prefix: str = "t") -> Optional[SymTensorField2]:
    names = [f"{prefix}11", f"{prefix}12", f"{prefix}22"]
    if all(n in snapshot.fields for n in names):
        return SymTensorField2(*(snapshot.fields[n] for n in names))
    return None


def snapshot_target(snapshot: Snapshot, component: Optional[str] = None) -> Union[ScalarField, SymTensorField2, VectorField2]:
    """The field a norm query refers to: a named component, the stress tensor, the velocity, or the only field."""
    if component:
        if component == "tau":
            tensor = snapshot_tensor(snapshot)
            if tensor is None:
                raise SchemaError("snapshot has no t11/t12/t22 components")
            return tensor
        if component == "u":
            if "u1" not in snapshot.fields or "u2" not in snapshot.fields:
                raise SchemaError("snapshot has no u1/u2 components")
            return VectorField2(snapshot.fields["u1"], snapshot.fields["u2"])
        if component not in snapshot.fields:
            raise SchemaError(f"snapshot has no component '{component}' (available: {list(snapshot.fields)})")
        return snapshot.fields[component]
    if len(snapshot.fields) == 1:
        return next(iter(snapshot.fields.values()))
    tensor = snapshot_tensor(snapshot)
    if tensor is not None:
        return tensor
    raise SchemaError(f"snapshot holds several components {list(snapshot.fields)}; name one with --component")
