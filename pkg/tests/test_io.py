import numpy as np
import pytest

from radflavour.core import RoiMask, Unit, Volume
from radflavour.io import (
    FeatureTable,
    FormatError,
    read_feature_table,
    read_mhd,
    read_mhd_mask,
    write_feature_table,
    write_mask_mhd,
    write_mhd,
)


class TestMhdRoundTrip:
    def test_double_with_raw_companion(self, tmp_path, rng):
        vol = Volume(rng.normal(size=(5, 4, 3)), spacing=(0.5, 0.75, 2.0),
                     unit=Unit.HU)
        path = tmp_path / "img.mhd"
        write_mhd(vol, path)
        assert (tmp_path / "img.raw").exists()
        back = read_mhd(path, unit=Unit.HU)
        assert np.array_equal(back.data, vol.data)
        assert back.spacing == vol.spacing
        assert back.unit is Unit.HU

    def test_local_payload(self, tmp_path, rng):
        vol = Volume(rng.normal(size=(3, 3, 3)))
        path = tmp_path / "img.mhd"
        write_mhd(vol, path, local=True)
        assert not (tmp_path / "img.raw").exists()
        back = read_mhd(path)
        assert np.array_equal(back.data, vol.data)

    def test_big_endian(self, tmp_path, rng):
        vol = Volume(rng.normal(size=(4, 3, 2)))
        path = tmp_path / "img.mhd"
        write_mhd(vol, path, msb=True, local=True)
        assert b"BinaryDataByteOrderMSB = True" in path.read_bytes()
        back = read_mhd(path)
        assert np.array_equal(back.data, vol.data)

    def test_integer_element_types(self, tmp_path):
        data = np.arange(8, dtype=float).reshape((2, 2, 2))
        vol = Volume(data)
        for et in ("MET_SHORT", "MET_UCHAR", "MET_FLOAT"):
            path = tmp_path / f"{et}.mhd"
            write_mhd(vol, path, element_type=et, local=True)
            back = read_mhd(path)
            assert np.array_equal(back.data, data)

    def test_payload_is_x_fastest(self, tmp_path):
        data = np.arange(8, dtype=float).reshape((2, 2, 2))
        vol = Volume(data)
        path = tmp_path / "img.mhd"
        write_mhd(vol, path, element_type="MET_UCHAR", local=True)
        payload = path.read_bytes().split(b"ElementDataFile = LOCAL\n", 1)[1]
        assert list(payload) == list(data.ravel(order="F").astype(int))

    def test_deterministic_bytes(self, tmp_path, rng):
        vol = Volume(rng.normal(size=(4, 4, 4)))
        p1, p2 = tmp_path / "a.mhd", tmp_path / "b.mhd"
        write_mhd(vol, p1, local=True)
        write_mhd(vol, p2, local=True)
        assert p1.read_bytes() == p2.read_bytes()


class TestMhdErrors:
    def _write(self, path, text, payload=b""):
        path.write_bytes(text.encode() + payload)

    def test_missing_key(self, tmp_path):
        p = tmp_path / "bad.mhd"
        self._write(p, "NDims = 3\nElementDataFile = LOCAL\n")
        with pytest.raises(FormatError, match="missing required header key"):
            read_mhd(p)

    def test_bad_ndims(self, tmp_path):
        p = tmp_path / "bad.mhd"
        self._write(p, "NDims = 2\nDimSize = 2 2\nElementSpacing = 1 1\n"
                       "ElementType = MET_UCHAR\nElementDataFile = LOCAL\n")
        with pytest.raises(FormatError, match="NDims"):
            read_mhd(p)

    def test_unsupported_type(self, tmp_path):
        p = tmp_path / "bad.mhd"
        self._write(p, "NDims = 3\nDimSize = 1 1 1\nElementSpacing = 1 1 1\n"
                       "ElementType = MET_LONG\nElementDataFile = LOCAL\n")
        with pytest.raises(FormatError, match="ElementType"):
            read_mhd(p)

    def test_payload_size_mismatch(self, tmp_path):
        p = tmp_path / "bad.mhd"
        self._write(p, "NDims = 3\nDimSize = 2 2 2\nElementSpacing = 1 1 1\n"
                       "ElementType = MET_UCHAR\nElementDataFile = LOCAL\n",
                    payload=b"\x00" * 5)
        with pytest.raises(FormatError, match="payload"):
            read_mhd(p)

    def test_missing_raw_file(self, tmp_path):
        p = tmp_path / "bad.mhd"
        self._write(p, "NDims = 3\nDimSize = 1 1 1\nElementSpacing = 1 1 1\n"
                       "ElementType = MET_UCHAR\nElementDataFile = gone.raw\n")
        with pytest.raises(FormatError, match="not found"):
            read_mhd(p)

    def test_malformed_line(self, tmp_path):
        p = tmp_path / "bad.mhd"
        self._write(p, "NDims 3\n")
        with pytest.raises(FormatError, match="malformed"):
            read_mhd(p)


class TestMaskIo:
    def test_round_trip_with_spacing(self, tmp_path, rng):
        mask = RoiMask(rng.random((4, 4, 3)) < 0.4)
        path = tmp_path / "mask.mhd"
        write_mask_mhd(mask, path, spacing=(0.5, 0.5, 1.5))
        back = read_mhd_mask(path)
        assert np.array_equal(back.mask, mask.mask)
        assert read_mhd(path).spacing == (0.5, 0.5, 1.5)


class TestFeatureTable:
    def _table(self):
        t = FeatureTable(["alpha", "beta"])
        t.set_row("c1", "vanilla", [1.0, 0.1 + 0.2])
        t.set_row("c1", "bin_width(width=0.5)", {"alpha": 3.5, "beta": None})
        t.set_row("c0", "vanilla", [np.pi, -1e-300])
        return t

    def test_rows_keep_insertion_order(self):
        t = self._table()
        assert [cid for cid, _ in t.keys()] == ["c1", "c1", "c0"]
        assert t.case_ids() == ["c1", "c0"]
        assert t.flavours() == ["vanilla", "bin_width(width=0.5)"]

    def test_duplicate_row_rejected(self):
        t = self._table()
        with pytest.raises(ValueError, match="duplicate"):
            t.set_row("c1", "vanilla", [0.0, 0.0])

    def test_width_mismatch_rejected(self):
        t = FeatureTable(["a"])
        with pytest.raises(ValueError, match="cells"):
            t.set_row("c", "vanilla", [1.0, 2.0])

    def test_non_finite_rejected(self):
        t = FeatureTable(["a"])
        with pytest.raises(ValueError, match="non-finite"):
            t.set_row("c", "vanilla", [np.inf])

    def test_csv_round_trip_is_exact(self, tmp_path):
        t = self._table()
        path = tmp_path / "t.csv"
        t.to_csv(path)
        assert FeatureTable.from_csv(path) == t

    def test_json_round_trip_is_exact(self, tmp_path):
        t = self._table()
        path = tmp_path / "t.json"
        t.to_json(path)
        assert FeatureTable.from_json(path) == t

    def test_missing_cell_serializes_empty(self, tmp_path):
        t = self._table()
        path = tmp_path / "t.csv"
        t.to_csv(path)
        line = path.read_text().splitlines()[2]
        assert line.endswith(",")
        assert FeatureTable.from_csv(path).row(
            "c1", "bin_width(width=0.5)") == [3.5, None]

    def test_csv_bytes_deterministic(self, tmp_path):
        t = self._table()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        t.to_csv(p1)
        t.to_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_from_csv_rejects_wrong_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("id,flavour,a\n")
        with pytest.raises(FormatError):
            FeatureTable.from_csv(p)

    def test_from_csv_rejects_empty(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("")
        with pytest.raises(FormatError):
            FeatureTable.from_csv(p)

    def test_format_dispatch(self, tmp_path):
        t = self._table()
        csv_path = tmp_path / "t.csv"
        json_path = tmp_path / "t.json"
        write_feature_table(t, csv_path, format="CSV")
        write_feature_table(t, json_path, format="JSON")
        assert read_feature_table(csv_path) == t
        assert read_feature_table(json_path) == t
        with pytest.raises(FormatError):
            write_feature_table(t, tmp_path / "t.xml", format="XML")
