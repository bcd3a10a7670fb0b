"""Binary and ASCII STL reading and writing.

Coordinates are float32 on disk and float64 in memory; precision is lost only
at this boundary.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Literal, Tuple, Union

import numpy as np

from cadeval.errors import EmptyStl, Malformed, Truncated
from cadeval.geometry import (
    DEFAULT_WELD_TOLERANCE,
    TriangleMesh,
    triangle_normals,
    weld_vertices,
)

logger = logging.getLogger(__name__)

StlFormat = Literal["binary", "ascii"]

HEADER_SIZE = 80
RECORD_SIZE = 50
DEFAULT_HEADER = b"cadeval binary STL"
FLOAT32_MAX = float(np.finfo(np.float32).max)

RECORD_DTYPE = np.dtype(
    [("normal", "<f4", (3,)), ("vertices", "<f4", (3, 3)), ("attribute", "<u2")]
)


def _as_float32(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float32).astype(np.float64)


@dataclass(frozen=True)
class StlDocument:
    """Facets of one STL solid: normals (N, 3) and corners (N, 3, 3)."""

    normals: np.ndarray
    facets: np.ndarray
    name: str = ""
    header: bytes = b""
    format: StlFormat = "binary"

    def __post_init__(self):
        facets = _as_float32(self.facets).reshape(-1, 3, 3)
        normals = _as_float32(self.normals).reshape(-1, 3)
        if len(normals) != len(facets):
            raise ValueError("One normal per facet is required")
        if not (np.all(np.isfinite(facets)) and np.all(np.isfinite(normals))):
            raise ValueError("STL coordinates must be finite")
        facets.setflags(write=False)
        normals.setflags(write=False)
        object.__setattr__(self, "facets", facets)
        object.__setattr__(self, "normals", normals)

    def __len__(self) -> int:
        return len(self.facets)


# Reading


def _parse_binary(data: bytes) -> StlDocument:
    if len(data) < HEADER_SIZE + 4:
        raise Truncated(
            f"Binary STL needs at least {HEADER_SIZE + 4} bytes, got {len(data)}"
        )
    (count,) = struct.unpack_from("<I", data, HEADER_SIZE)
    expected = HEADER_SIZE + 4 + RECORD_SIZE * count
    if len(data) != expected:
        raise Truncated(
            f"Binary STL declares {count} facets ({expected} bytes), "
            f"file has {len(data)} bytes"
        )
    if count:
        records = np.frombuffer(
            data, dtype=RECORD_DTYPE, count=count, offset=HEADER_SIZE + 4
        )
    else:
        records = np.zeros(0, dtype=RECORD_DTYPE)
    if not (
        np.isfinite(records["vertices"]).all()
        and np.isfinite(records["normal"]).all()
    ):
        raise Malformed("Binary STL contains non-finite coordinates")
    header = data[:HEADER_SIZE]
    name = header.split(b"\0", 1)[0].decode("ascii", errors="replace").strip()
    return StlDocument(
        normals=records["normal"],
        facets=records["vertices"],
        name=name,
        header=header,
        format="binary",
    )


class _AsciiTokens:
    """Whitespace-separated tokens with their line numbers."""

    def __init__(self, lines: List[Tuple[int, List[str]]]):
        self._items: Iterator[Tuple[int, str]] = (
            (lineno, token) for lineno, tokens in lines for token in tokens
        )
        self.line = lines[-1][0] if lines else 1

    def next(self) -> Tuple[int, str]:
        try:
            return next(self._items)
        except StopIteration:
            raise Malformed("Unexpected end of ASCII STL", line=self.line) from None

    def expect(self, *words: str) -> None:
        for word in words:
            lineno, token = self.next()
            if token != word:
                raise Malformed(f"Expected '{word}', found '{token}'", line=lineno)

    def floats(self, count: int) -> List[float]:
        values = []
        for _ in range(count):
            lineno, token = self.next()
            try:
                value = float(token)
            except ValueError:
                raise Malformed(f"Invalid number '{token}'", line=lineno) from None
            if not np.isfinite(value) or abs(value) > FLOAT32_MAX:
                raise Malformed(f"Non-finite number '{token}'", line=lineno)
            values.append(value)
        return values


def _parse_ascii(data: bytes) -> StlDocument:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as e:
        raise Malformed("ASCII STL contains non-ASCII bytes") from e

    lines = [(n, line.split()) for n, line in enumerate(text.splitlines(), start=1)]
    lines = [(n, tokens) for n, tokens in lines if tokens]
    if not lines or lines[0][1][0] != "solid":
        raise Malformed("ASCII STL must start with 'solid'", line=1)
    name = " ".join(lines[0][1][1:])
    tokens = _AsciiTokens(lines[1:])

    normals: List[List[float]] = []
    facets: List[List[float]] = []
    while True:
        lineno, token = tokens.next()
        if token == "endsolid":
            end_line = lineno
            break
        if token != "facet":
            raise Malformed(
                f"Expected 'facet' or 'endsolid', found '{token}'", line=lineno
            )
        tokens.expect("normal")
        normals.append(tokens.floats(3))
        tokens.expect("outer", "loop")
        corners = []
        for _ in range(3):
            tokens.expect("vertex")
            corners.append(tokens.floats(3))
        facets.append(corners)
        tokens.expect("endloop", "endfacet")

    trailing = [n for n, _ in lines if n > end_line]
    if trailing:
        raise Malformed("Content after 'endsolid'", line=trailing[0])

    return StlDocument(
        normals=np.array(normals, dtype=np.float64).reshape(-1, 3),
        facets=np.array(facets, dtype=np.float64).reshape(-1, 3, 3),
        name=name,
        format="ascii",
    )


def parse_stl(data: bytes) -> StlDocument:
    """Parse STL bytes, auto-detecting the format.

    ASCII is assumed only when the data starts with ``solid`` and parses fully
    as ASCII; anything else is read as binary.

    :raises EmptyStl: for empty input.
    :raises Truncated: when the binary length disagrees with the facet count.
    :raises Malformed: for ASCII grammar violations that are not valid binary.
    """
    if not data:
        raise EmptyStl("STL data is empty")
    if data.lstrip()[:5] == b"solid":
        try:
            return _parse_ascii(data)
        except Malformed as ascii_error:
            logger.debug("ASCII parse failed (%s), retrying as binary", ascii_error)
            try:
                return _parse_binary(data)
            except Truncated:
                raise ascii_error from None
    return _parse_binary(data)


def read_stl_file(path: Union[str, Path]) -> StlDocument:
    return parse_stl(Path(path).read_bytes())


# Writing


def _format_float(value: float) -> str:
    # 9 significant digits reproduce any float32 exactly
    return f"{value:.9g}"


def _write_ascii(doc: StlDocument) -> bytes:
    name = doc.name or "cadeval"
    out = [f"solid {name}"]
    for normal, corners in zip(doc.normals, doc.facets):
        out.append("  facet normal " + " ".join(_format_float(v) for v in normal))
        out.append("    outer loop")
        for corner in corners:
            out.append("      vertex " + " ".join(_format_float(v) for v in corner))
        out.append("    endloop")
        out.append("  endfacet")
    out.append(f"endsolid {name}")
    return ("\n".join(out) + "\n").encode("ascii")


def _write_binary(doc: StlDocument) -> bytes:
    name = doc.name.encode("ascii", errors="replace")
    header = doc.header or name or DEFAULT_HEADER
    header = header[:HEADER_SIZE].ljust(HEADER_SIZE, b"\0")
    records = np.zeros(len(doc), dtype=RECORD_DTYPE)
    records["normal"] = doc.normals
    records["vertices"] = doc.facets
    return header + struct.pack("<I", len(doc)) + records.tobytes()


def write_stl(doc: StlDocument, format: StlFormat = "binary") -> bytes:
    """Serialize a document; binary records carry a zero attribute word."""
    if format == "binary":
        return _write_binary(doc)
    if format == "ascii":
        return _write_ascii(doc)
    raise ValueError(f"Unknown STL format: {format}")


def write_stl_file(
    path: Union[str, Path], doc: StlDocument, format: StlFormat = "binary"
) -> None:
    Path(path).write_bytes(write_stl(doc, format))
    logger.info("Wrote %s STL with %d facets to %s", format, len(doc), path)


# Mesh conversion


def document_from_mesh(mesh: TriangleMesh, name: str = "") -> StlDocument:
    return StlDocument(
        normals=triangle_normals(mesh),
        facets=mesh.corners,
        name=name,
        header=b"",
    )


def mesh_from_document(
    doc: StlDocument, tolerance: float = DEFAULT_WELD_TOLERANCE
) -> TriangleMesh:
    """Weld the facet soup; stored normals are ignored in favour of winding."""
    return weld_vertices(doc.facets, tolerance)
