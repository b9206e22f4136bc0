"""Bit-exact volume I/O (MetaImage .mhd/.raw) and feature tables (CSV/JSON).

The MetaImage header is plain text ``Key = Value`` lines; the payload is a
raw little- or big-endian dump in canonical x-fastest order.  Feature-table
floats are rendered with 17 significant digits, which round-trips 64-bit
floats exactly.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Optional

import numpy as np

from .core import DomainError, RoiMask, Unit, Volume


class FormatError(ValueError):
    """Raised on malformed or inconsistent files."""


ELEMENT_TYPES = {
    "MET_SHORT": np.int16,
    "MET_FLOAT": np.float32,
    "MET_DOUBLE": np.float64,
    "MET_UCHAR": np.uint8,
}

_REQUIRED_KEYS = ("NDims", "DimSize", "ElementSpacing", "ElementType", "ElementDataFile")


def _parse_header(blob: bytes):
    """Split an .mhd blob into a key->value dict and any trailing payload.

    The header ends at the ElementDataFile line; for LOCAL payloads the
    remaining bytes are the raw data.
    """
    header: dict[str, str] = {}
    pos = 0
    while pos < len(blob):
        eol = blob.find(b"\n", pos)
        if eol < 0:
            line, next_pos = blob[pos:], len(blob)
        else:
            line, next_pos = blob[pos:eol], eol + 1
        try:
            text = line.decode("ascii").strip()
        except UnicodeDecodeError as exc:
            raise FormatError(f"non-ASCII header line at byte {pos}") from exc
        pos = next_pos
        if not text:
            continue
        key, eq, value = text.partition("=")
        if not eq:
            raise FormatError(f"malformed header line {text!r}")
        key = key.strip()
        header[key] = value.strip()
        if key == "ElementDataFile":
            break
    return header, blob[pos:]


def read_mhd(path, unit: Unit = Unit.ARBITRARY) -> Volume:
    """Read a MetaImage volume.

    The intensity unit is not part of the format; callers pass it from a
    sidecar (cohort manifest), defaulting to ARBITRARY.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    header, local_payload = _parse_header(blob)

    for key in _REQUIRED_KEYS:
        if key not in header:
            raise FormatError(f"{path}: missing required header key {key}")
    if header["NDims"] != "3":
        raise FormatError(f"{path}: NDims must be 3, got {header['NDims']}")
    try:
        dims = tuple(int(v) for v in header["DimSize"].split())
        spacing = tuple(float(v) for v in header["ElementSpacing"].split())
    except ValueError as exc:
        raise FormatError(f"{path}: unparseable DimSize/ElementSpacing") from exc
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise FormatError(f"{path}: DimSize must be three positive ints, got {dims}")
    if header["ElementType"] not in ELEMENT_TYPES:
        raise FormatError(f"{path}: unsupported ElementType {header['ElementType']}")
    dtype = np.dtype(ELEMENT_TYPES[header["ElementType"]])
    msb = header.get("BinaryDataByteOrderMSB", "False").lower() == "true"
    dtype = dtype.newbyteorder(">" if msb else "<")

    datafile = header["ElementDataFile"]
    if datafile == "LOCAL":
        payload = local_payload
    else:
        raw_path = os.path.join(os.path.dirname(os.path.abspath(path)), datafile)
        if not os.path.exists(raw_path):
            raise FormatError(f"{path}: ElementDataFile {datafile!r} not found")
        with open(raw_path, "rb") as fh:
            payload = fh.read()

    expected = int(np.prod(dims)) * dtype.itemsize
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, header declares {expected}"
        )
    flat = np.frombuffer(payload, dtype=dtype)
    return Volume.from_flat(flat.astype(np.float64), dims, spacing, unit)


def read_mhd_mask(path) -> RoiMask:
    """Read a mask volume; voxels with value > 0.5 are included."""
    vol = read_mhd(path)
    return RoiMask(vol.data > 0.5)


def write_mhd(volume: Volume, path, element_type: str = "MET_DOUBLE",
              msb: bool = False, local: bool = False) -> None:
    """Write a volume as .mhd (+ .raw unless ``local``).

    The payload is the canonical x-fastest flat ordering, cast to the
    requested element type.
    """
    if element_type not in ELEMENT_TYPES:
        raise FormatError(f"unsupported ElementType {element_type}")
    dtype = np.dtype(ELEMENT_TYPES[element_type]).newbyteorder(">" if msb else "<")
    payload = volume.flat().astype(dtype).tobytes()

    if local:
        datafile = "LOCAL"
    else:
        datafile = os.path.splitext(os.path.basename(path))[0] + ".raw"
    lines = [
        "NDims = 3",
        "DimSize = {} {} {}".format(*volume.dims),
        "ElementSpacing = {} {} {}".format(*(repr(s) for s in volume.spacing)),
        f"ElementType = {element_type}",
        f"BinaryDataByteOrderMSB = {'True' if msb else 'False'}",
        f"ElementDataFile = {datafile}",
    ]
    header = ("\n".join(lines) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        if local:
            fh.write(payload)
    if not local:
        with open(os.path.join(os.path.dirname(os.path.abspath(path)), datafile), "wb") as fh:
            fh.write(payload)


def write_mask_mhd(mask: RoiMask, path, spacing=(1.0, 1.0, 1.0),
                   local: bool = False) -> None:
    vol = Volume(mask.mask.astype(np.float64), spacing=spacing,
                 unit=Unit.ARBITRARY)
    write_mhd(vol, path, element_type="MET_UCHAR", local=local)


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


class FeatureTable:
    """Feature rows keyed by (case_id, flavour string).

    Cells are finite floats or None (explicit missing).  Rows keep
    insertion order; (case, flavour) pairs and column names are unique.
    """

    def __init__(self, feature_names):
        names = list(feature_names)
        if len(set(names)) != len(names):
            raise DomainError("duplicate feature names")
        self.feature_names = names
        self._rows: dict[tuple[str, str], list[Optional[float]]] = {}

    def set_row(self, case_id: str, flavour: str, values) -> None:
        key = (str(case_id), str(flavour))
        if key in self._rows:
            raise DomainError(f"duplicate row for {key}")
        if isinstance(values, dict):
            row = [values.get(name) for name in self.feature_names]
        else:
            row = list(values)
        if len(row) != len(self.feature_names):
            raise DomainError(
                f"row for {key} has {len(row)} cells, expected {len(self.feature_names)}"
            )
        clean: list[Optional[float]] = []
        for cell in row:
            if cell is None:
                clean.append(None)
            else:
                cell = float(cell)
                if not np.isfinite(cell):
                    raise DomainError(f"non-finite cell in row {key}")
                clean.append(cell)
        self._rows[key] = clean

    def row(self, case_id: str, flavour: str) -> list[Optional[float]]:
        return list(self._rows[(case_id, flavour)])

    def keys(self) -> list[tuple[str, str]]:
        return list(self._rows.keys())

    def rows(self):
        """Iterate ((case_id, flavour), values) in insertion order."""
        for key, vals in self._rows.items():
            yield key, list(vals)

    def case_ids(self) -> list[str]:
        seen = dict.fromkeys(cid for cid, _ in self._rows)
        return list(seen)

    def flavours(self) -> list[str]:
        seen = dict.fromkeys(fl for _, fl in self._rows)
        return list(seen)

    def __len__(self):
        return len(self._rows)

    def __eq__(self, other):
        return (
            isinstance(other, FeatureTable)
            and self.feature_names == other.feature_names
            and self._rows == other._rows
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["case_id", "flavour"] + self.feature_names)
            for (cid, flavour), row in self._rows.items():
                writer.writerow([cid, flavour] + [_fmt_cell(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "FeatureTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FormatError(f"{path}: empty CSV") from None
            if header[:2] != ["case_id", "flavour"]:
                raise FormatError(f"{path}: CSV must start with case_id,flavour columns")
            table = cls(header[2:])
            for line in reader:
                if not line:
                    continue
                cells = [None if cell == "" else float(cell) for cell in line[2:]]
                table.set_row(line[0], line[1], cells)
        return table

    def to_json(self, path) -> None:
        doc = {
            "columns": ["case_id", "flavour"] + self.feature_names,
            "rows": [
                [cid, flavour] + list(row) for (cid, flavour), row in self._rows.items()
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "FeatureTable":
        with open(path) as fh:
            doc = json.load(fh)
        cols = doc.get("columns")
        if not cols or cols[:2] != ["case_id", "flavour"]:
            raise FormatError(f"{path}: JSON table must carry case_id,flavour columns")
        table = cls(cols[2:])
        for row in doc.get("rows", []):
            table.set_row(row[0], row[1], row[2:])
        return table


def write_feature_table(table: FeatureTable, path, format: str = "CSV") -> None:
    fmt = format.upper()
    if fmt == "CSV":
        table.to_csv(path)
    elif fmt == "JSON":
        table.to_json(path)
    else:
        raise FormatError(f"unknown feature table format {format!r}")


def read_feature_table(path, format: Optional[str] = None) -> FeatureTable:
    if format is None:
        format = "JSON" if str(path).endswith(".json") else "CSV"
    fmt = format.upper()
    if fmt == "CSV":
        return FeatureTable.from_csv(path)
    if fmt == "JSON":
        return FeatureTable.from_json(path)
    raise FormatError(f"unknown feature table format {format!r}")
