"""
Tests for the snapshot file format.
"""
import numpy as np
import pytest

from solver.errors import SchemaError
from solver.spectral_core import ScalarField, SymTensorField2, VectorField2
from utils.field_io import (
    HEADER_END,
    read_snapshot,
    read_state,
    snapshot_target,
    write_snapshot,
    write_state,
)
from tests.helpers import band_state


class TestStateSnapshots:

    @pytest.mark.parametrize("spectral", [False, True])
    def test_state_survives_a_write(self, tmp_path, grid32, spectral):
        state = band_state(grid32).at_time(1.25)
        path = write_state(str(tmp_path / "s.snap"), state, spectral=spectral)
        back = read_state(path)
        assert back.t == 1.25
        assert back.u.spectral == spectral
        assert np.array_equal(back.tau.t12.values(), state.tau.t12.as_spectral().values()
                              if spectral else state.tau.t12.values())

    def test_header_is_plain_text(self, tmp_path, grid16):
        path = write_snapshot(str(tmp_path / "f.snap"), {"g": ScalarField.zeros(grid16)}, t=0.5)
        head = open(path, "rb").read().split(HEADER_END.encode())[0].decode("ascii")
        assert "n=16" in head
        assert "representation=real" in head
        assert "components=g" in head
        assert "endianness=little" in head

    def test_payload_is_little_endian_row_major(self, tmp_path, grid16):
        values = np.arange(256, dtype=float).reshape(16, 16)
        path = write_snapshot(str(tmp_path / "f.snap"), {"g": ScalarField(grid16, values)})
        raw = open(path, "rb").read()
        payload = raw[raw.index(HEADER_END.encode()) + len(HEADER_END) + 1:]
        assert np.array_equal(np.frombuffer(payload, dtype="<f8").reshape(16, 16), values)


class TestMalformedSnapshots:

    def write(self, tmp_path, header_lines, payload=b""):
        path = tmp_path / "bad.snap"
        path.write_bytes(("\n".join(header_lines) + "\n").encode() + payload)
        return str(path)

    def test_missing_terminator(self, tmp_path):
        with pytest.raises(SchemaError, match="not terminated"):
            read_snapshot(self.write(tmp_path, ["n=16"]))

    def test_missing_keys(self, tmp_path):
        with pytest.raises(SchemaError, match="lacks keys"):
            read_snapshot(self.write(tmp_path, ["n=16", HEADER_END]))

    def test_big_endian_rejected(self, tmp_path):
        lines = ["n=16", "L=1.0", "representation=real", "components=g", "endianness=big", HEADER_END]
        with pytest.raises(SchemaError, match="endianness"):
            read_snapshot(self.write(tmp_path, lines))

    def test_truncated_payload(self, tmp_path):
        lines = ["n=16", "L=1.0", "representation=real", "components=g", "endianness=little", HEADER_END]
        with pytest.raises(SchemaError, match="data bytes"):
            read_snapshot(self.write(tmp_path, lines, b"\x00" * 100))

    def test_invalid_grid(self, tmp_path):
        lines = ["n=12", "L=1.0", "representation=real", "components=g", "endianness=little", HEADER_END]
        with pytest.raises(SchemaError, match="invalid grid"):
            read_snapshot(self.write(tmp_path, lines))

    def test_mixed_representations_cannot_be_written(self, tmp_path, grid16):
        fields = {"a": ScalarField.zeros(grid16), "b": ScalarField.zeros(grid16, spectral=True)}
        with pytest.raises(SchemaError):
            write_snapshot(str(tmp_path / "x.snap"), fields)


class TestTargets:

    def test_component_selection(self, tmp_path, grid32):
        snap = read_snapshot(write_state(str(tmp_path / "s.snap"), band_state(grid32)))
        assert isinstance(snapshot_target(snap, "tau"), SymTensorField2)
        assert isinstance(snapshot_target(snap, "u"), VectorField2)
        assert isinstance(snapshot_target(snap, "t11"), ScalarField)
        # several components and no choice: the stress tensor
        assert isinstance(snapshot_target(snap), SymTensorField2)
        with pytest.raises(SchemaError, match="no component"):
            snapshot_target(snap, "w")

    def test_single_field_snapshot(self, tmp_path, grid16):
        snap = read_snapshot(write_snapshot(str(tmp_path / "g.snap"), {"g": ScalarField.zeros(grid16)}))
        assert isinstance(snapshot_target(snap), ScalarField)
        with pytest.raises(SchemaError):
            snapshot_target(snap, "tau")
        with pytest.raises(SchemaError):
            snap.to_state()
