"""Minimal readers and writers for the asset formats the pipeline touches:
single-file NIfTI-1 volumes and binary STL meshes.

Scope is deliberately narrow: sform-only affines (qform quaternion decoding
is complexity without payoff for machine-written volumes), float32/int16/
uint8 payloads, binary STL with exact-match vertex deduplication. Gzipped
NIfTI is handled transparently at the byte-source layer (load_volume /
save_volume).
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AsciiStlUnsupported,
    BadMagic,
    InvalidMesh,
    InvalidVolumeData,
    NavfieldError,
    NoSform,
    Truncated,
    UnsupportedDatatype,
)
from .geometry import (
    FieldUnit,
    GridSpec,
    ScalarField,
    VectorField,
    grid_from_affine,
)

NIFTI_HEADER_SIZE = 348
_NIFTI_STRUCT = "i10s18sihcc8h3fhhhh8f3fhcc4fii80s24shh6f4f4f4f16s4s"
assert struct.calcsize("<" + _NIFTI_STRUCT) == NIFTI_HEADER_SIZE

DT_UINT8 = 2
DT_INT16 = 4
DT_FLOAT32 = 16
_DTYPES = {DT_UINT8: "u1", DT_INT16: "i2", DT_FLOAT32: "f4"}
_BITPIX = {DT_UINT8: 8, DT_INT16: 16, DT_FLOAT32: 32}
INTENT_VECTOR = 1007
_UNITS_MM = 2


@dataclass(frozen=True, eq=False)
class NiftiVolume:
    """A parsed volume: the field payload plus the header metadata this
    subset preserves opaquely across a read/write round trip."""

    field: ScalarField | VectorField
    datatype: int = DT_FLOAT32
    intent_code: int = 0
    intent_params: tuple[float, float, float] = (0.0, 0.0, 0.0)
    intent_name: bytes = b""
    descrip: bytes = b""

    @property
    def grid(self) -> GridSpec:
        return self.field.grid


def read_nifti(data: bytes) -> NiftiVolume:
    """Parse a single-file NIfTI-1 byte string.

    The grid comes from the sform affine (NoSform otherwise); uint8/int16
    payloads are converted to float32 and scl_slope/scl_inter applied when
    set.
    """
    if len(data) < NIFTI_HEADER_SIZE:
        raise Truncated(f"NIfTI header needs {NIFTI_HEADER_SIZE} bytes, "
                        f"got {len(data)}")
    magic = data[344:348]
    if magic != b"n+1\x00":
        if magic == b"ni1\x00":
            raise BadMagic("detached header/data NIfTI pairs are unsupported")
        raise BadMagic(f"not a NIfTI-1 volume (magic {magic!r})")
    for endian in ("<", ">"):
        if struct.unpack_from(endian + "i", data)[0] == NIFTI_HEADER_SIZE:
            break
    else:
        raise InvalidVolumeData("sizeof_hdr is not 348 in either byte order")
    fields = struct.unpack_from(endian + _NIFTI_STRUCT, data)
    dim = fields[7:15]
    intent_params = fields[15:18]
    intent_code, datatype = fields[18:20]
    vox_offset, scl_slope, scl_inter = fields[30:33]
    descrip = fields[42]
    sform_code = fields[45]
    srows = np.array(fields[52:64], dtype=np.float64).reshape(3, 4)
    intent_name = fields[64]

    if dim[0] not in (3, 4):
        raise InvalidVolumeData(f"dim[0] must be 3 or 4, got {dim[0]}")
    nx, ny, nz = dim[1], dim[2], dim[3]
    nt = dim[4] if dim[0] == 4 else 1
    if min(nx, ny, nz) < 1:
        raise InvalidVolumeData(f"non-positive dims {dim[1:4]}")
    if nt not in (1, 3):
        raise InvalidVolumeData(f"dim[4] must be 1 or 3, got {nt}")
    if datatype not in _DTYPES:
        raise UnsupportedDatatype(f"datatype code {datatype}")
    if sform_code <= 0:
        raise NoSform("sform_code is 0; qform decoding is out of scope")

    if not np.isfinite(vox_offset) or vox_offset < NIFTI_HEADER_SIZE:
        raise InvalidVolumeData(f"bad vox_offset {vox_offset}")
    offset = int(vox_offset)
    count = nx * ny * nz * nt
    nbytes = count * _BITPIX[datatype] // 8
    if len(data) < offset + nbytes:
        raise Truncated(f"data section needs {nbytes} bytes at offset {offset}")
    raw = np.frombuffer(data, dtype=endian + _DTYPES[datatype], count=count,
                        offset=offset)
    arr = raw.astype(np.float32) if datatype != DT_FLOAT32 else raw.astype("=f4")
    if scl_slope != 0.0 and (scl_slope, scl_inter) != (1.0, 0.0):
        arr = arr * np.float32(scl_slope) + np.float32(scl_inter)

    try:
        grid = grid_from_affine(srows, (nx, ny, nz))
    except NavfieldError as exc:
        raise InvalidVolumeData(f"bad sform affine: {exc}") from exc
    try:
        if nt == 3:
            # disk order is component-planar (t slowest); interleave in memory
            vol = np.ascontiguousarray(
                np.moveaxis(arr.reshape(3, nz, ny, nx), 0, -1))
            field = VectorField(grid=grid, data=vol, unit=FieldUnit.E_FIELD)
        else:
            field = ScalarField(grid=grid, data=arr.reshape(nz, ny, nx))
    except NavfieldError as exc:
        raise InvalidVolumeData(str(exc)) from exc
    return NiftiVolume(
        field=field,
        datatype=datatype,
        intent_code=intent_code,
        intent_params=tuple(float(v) for v in intent_params),
        intent_name=intent_name.rstrip(b"\x00"),
        descrip=descrip.rstrip(b"\x00"),
    )


def write_nifti(v: NiftiVolume | ScalarField | VectorField) -> bytes:
    """Serialize to canonical single-file NIfTI-1: little-endian header,
    float32 payload, sform set."""
    if not isinstance(v, NiftiVolume):
        intent = INTENT_VECTOR if isinstance(v, VectorField) else 0
        v = NiftiVolume(field=v, intent_code=intent)
    field = v.field
    grid = field.grid
    nx, ny, nz = grid.dims
    vector = isinstance(field, VectorField)
    if vector:
        payload = np.ascontiguousarray(
            np.moveaxis(field.data, -1, 0), dtype="<f4")
        dim = (4, nx, ny, nz, 3, 1, 1, 1)
        intent_code = v.intent_code or INTENT_VECTOR
    else:
        payload = np.ascontiguousarray(field.data, dtype="<f4")
        dim = (3, nx, ny, nz, 1, 1, 1, 1)
        intent_code = v.intent_code
    if len(v.descrip) > 80 or len(v.intent_name) > 16:
        raise InvalidVolumeData("descrip/intent_name exceed their header fields")

    affine = np.column_stack([grid.index_to_world_matrix(), grid.origin])
    pixdim = (1.0, *(float(s) for s in grid.spacing), 0.0, 0.0, 0.0, 0.0)
    header = struct.pack(
        "<" + _NIFTI_STRUCT,
        NIFTI_HEADER_SIZE,          # sizeof_hdr
        b"", b"", 0, 0, b"r", b"\x00",
        *dim,
        *v.intent_params,
        intent_code,
        DT_FLOAT32,
        _BITPIX[DT_FLOAT32],
        0,                          # slice_start
        *pixdim,
        352.0,                      # vox_offset
        1.0, 0.0,                   # scl_slope, scl_inter
        0, b"\x00",
        bytes([_UNITS_MM]),         # xyzt_units
        0.0, 0.0, 0.0, 0.0,         # cal_max, cal_min, slice_duration, toffset
        0, 0,                       # glmax, glmin
        v.descrip, b"",
        0, 1,                       # qform_code, sform_code
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        *(float(x) for x in affine[0]),
        *(float(x) for x in affine[1]),
        *(float(x) for x in affine[2]),
        v.intent_name,
        b"n+1\x00",
    )
    return header + b"\x00" * 4 + payload.tobytes()


def load_volume(path) -> NiftiVolume:
    """Read a .nii or .nii.gz file (gzip detected by magic bytes)."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return read_nifti(raw)


def save_volume(path, v: NiftiVolume | ScalarField | VectorField) -> None:
    """Write a volume; compresses when the suffix ends in .gz."""
    path = Path(path)
    data = write_nifti(v)
    if path.suffix == ".gz":
        data = gzip.compress(data, compresslevel=1)
    path.write_bytes(data)


# --- binary STL ----------------------------------------------------------------

STL_HEADER_SIZE = 80
STL_FACET_SIZE = 50
_FACET_DTYPE = np.dtype([
    ("normal", "<f4", (3,)),
    ("vertices", "<f4", (3, 3)),
    ("attr", "<u2"),
])
assert _FACET_DTYPE.itemsize == STL_FACET_SIZE


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Triangle mesh in world mm with an optional per-vertex scalar channel."""

    vertices: np.ndarray
    triangles: np.ndarray
    scalars: np.ndarray | None = None

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        tris = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.isfinite(verts).all():
            raise InvalidMesh("non-finite vertex coordinates")
        if len(tris) and (tris.min() < 0 or tris.max() >= len(verts)):
            raise InvalidMesh("triangle index out of range")
        if len(tris):
            a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
            if np.any((a == b) | (b == c) | (a == c)):
                raise InvalidMesh("degenerate triangle (repeated vertex index)")
        verts.setflags(write=False)
        tris.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        if self.scalars is not None:
            sc = np.array(self.scalars, dtype=np.float64).reshape(-1)
            if len(sc) != len(verts):
                raise InvalidMesh("scalar channel length != vertex count")
            sc.setflags(write=False)
            object.__setattr__(self, "scalars", sc)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)


def read_stl(data: bytes) -> SurfaceMesh:
    """Parse binary STL; vertices deduplicated by exact coordinate match,
    triangle winding preserved."""
    def bail(msg):
        if data[:5] == b"solid":
            raise AsciiStlUnsupported(
                "ASCII STL is unsupported (binary layout expected)")
        raise Truncated(msg)

    if len(data) < STL_HEADER_SIZE + 4:
        bail(f"binary STL needs at least 84 bytes, got {len(data)}")
    (count,) = struct.unpack_from("<I", data, STL_HEADER_SIZE)
    expected = STL_HEADER_SIZE + 4 + count * STL_FACET_SIZE
    if len(data) != expected:
        bail(f"facet count {count} implies {expected} bytes, got {len(data)}")
    if count == 0:
        return SurfaceMesh(vertices=np.zeros((0, 3)),
                           triangles=np.zeros((0, 3), dtype=np.int64))
    facets = np.frombuffer(data, dtype=_FACET_DTYPE, count=count,
                           offset=STL_HEADER_SIZE + 4)
    corners = facets["vertices"].reshape(-1, 3).astype(np.float64)
    if not np.isfinite(corners).all():
        raise InvalidMesh("non-finite vertex in STL facet")
    vertices, inverse = np.unique(corners, axis=0, return_inverse=True)
    return SurfaceMesh(vertices=vertices,
                       triangles=inverse.reshape(-1, 3).astype(np.int64))


def write_stl(mesh: SurfaceMesh, comment: bytes = b"navfield binary STL") -> bytes:
    """Serialize to binary STL with per-facet normals recomputed."""
    tris = mesh.triangles
    facets = np.zeros(len(tris), dtype=_FACET_DTYPE)
    corners = mesh.vertices[tris]  # (m, 3, 3)
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    normals = np.cross(e1, e2)
    lengths = np.linalg.norm(normals, axis=1)
    nonzero = lengths > 0
    normals[nonzero] /= lengths[nonzero, None]
    normals[~nonzero] = 0.0
    facets["normal"] = normals.astype(np.float32)
    facets["vertices"] = corners.astype(np.float32)
    header = comment[:STL_HEADER_SIZE].ljust(STL_HEADER_SIZE, b"\x00")
    return header + struct.pack("<I", len(tris)) + facets.tobytes()


def load_mesh(path) -> SurfaceMesh:
    return read_stl(Path(path).read_bytes())


def save_mesh(path, mesh: SurfaceMesh) -> None:
    Path(path).write_bytes(write_stl(mesh))
