"""Byte-exact codec and stream framing for an OpenIGTLink-compatible subset.

Wire layout (all integers big-endian):

    header (58 bytes): version u16 | type_name char[12] | device_name char[20]
                       | timestamp u64 (32.32 fixed point) | body_size u64
                       | crc u64 (CRC-64/ECMA-182 over the body)
    TRANSFORM body (48 bytes): 12 x float32, column order: the three rotation
                       basis vectors, then the translation, mm.
    IMAGE body (72 + pixels): version u16 | num_components u8 | scalar_type u8
                       | endian u8 | coordinate u8 | dims 3 x u16
                       | matrix 12 x float32 (spacing-scaled axis columns,
                         then origin) | subvolume offset 3 x u16
                       | subvolume size 3 x u16 | pixels float32 big-endian,
                       (z, y, x) row-major, components interleaved.

Only TRANSFORM and IMAGE are in the subset; decoders raise typed
ProtocolError subclasses and never read past the supplied bytes.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadComponentCount,
    BadGeometry,
    BadLength,
    BadPixelData,
    BadVersion,
    BodyTooLarge,
    CrcMismatch,
    NameTooLong,
    NavfieldError,
    Truncated,
    UnknownType,
    UnsupportedScalarType,
)
from .geometry import (
    FieldUnit,
    GridSpec,
    RigidPose,
    ScalarField,
    VectorField,
    grid_from_affine,
    make_pose,
)

HEADER_SIZE = 58
PROTOCOL_VERSION = 2
TYPE_TRANSFORM = "TRANSFORM"
TYPE_IMAGE = "IMAGE"
KNOWN_TYPES = frozenset({TYPE_TRANSFORM, TYPE_IMAGE})

IMAGE_HEADER_SIZE = 72
SCALAR_FLOAT32 = 10  # OpenIGTLink scalar type code
ENDIAN_BIG = 1
COORD_RAS = 1

# Refuse to allocate bodies beyond this; a 512 MB frame is three orders of
# magnitude past anything this subset streams.
MAX_BODY_SIZE = 512 * 1024 * 1024

_HEADER_STRUCT = struct.Struct(">H12s20sQQQ")
_IMAGE_HEAD_STRUCT = struct.Struct(">HBBBB3H12f3H3H")

# --- CRC-64/ECMA-182 ---------------------------------------------------------
# Polynomial 0x42F0E1EBA9EA3693, MSB-first, init 0, no reflection, no final
# xor. Check value: crc64(b"123456789") == 0x6C40DF5F0B497347.

CRC_POLY = 0x42F0E1EBA9EA3693
_MASK64 = (1 << 64) - 1
_TOPBIT = 1 << 63


def crc64_bitserial(data: bytes) -> int:
    """Reference bit-by-bit shift-register CRC. Slow; exists so the
    table-driven implementation has something independent to be checked
    against."""
    crc = 0
    for byte in data:
        crc ^= byte << 56
        for _ in range(8):
            if crc & _TOPBIT:
                crc = ((crc << 1) ^ CRC_POLY) & _MASK64
            else:
                crc = (crc << 1) & _MASK64
    return crc


def _make_crc_table() -> list[int]:
    table = []
    for i in range(256):
        crc = i << 56
        for _ in range(8):
            if crc & _TOPBIT:
                crc = ((crc << 1) ^ CRC_POLY) & _MASK64
            else:
                crc = (crc << 1) & _MASK64
        table.append(crc)
    return table


_CRC_TABLE = _make_crc_table()
_CRC_TABLE_NP = np.array(_CRC_TABLE, dtype=np.uint64)


def _crc64_scalar(data: bytes, crc: int = 0) -> int:
    table = _CRC_TABLE
    for b in data:
        crc = ((crc << 8) & _MASK64) ^ table[(crc >> 56) ^ b]
    return crc


def _poly_mulmod(a: int, b: int) -> int:
    """Carry-less a*b mod the CRC polynomial, both operands < 2**64."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> 64:
            a = (a & _MASK64) ^ CRC_POLY
    return r


def _x_pow_8n(nbytes: int) -> int:
    """x**(8*nbytes) mod P, by square-and-multiply."""
    e = 8 * nbytes
    acc, sq = 1, 2
    while e:
        if e & 1:
            acc = _poly_mulmod(acc, sq)
        sq = _poly_mulmod(sq, sq)
        e >>= 1
    return acc


def _make_reduce_table() -> np.ndarray:
    # _REDUCE[i] = x**(64+i) mod P, used to fold the high half of a 128-bit
    # carry-less product back under the polynomial.
    vals = []
    cur = _x_pow_8n(8)  # x^64 mod P
    for _ in range(64):
        vals.append(cur)
        cur = _poly_mulmod(cur, 2)
    return np.array(vals, dtype=np.uint64)


_REDUCE = _make_reduce_table()
_SHIFT_POW_CACHE: dict[int, int] = {}


def _mulmod_vec(v: np.ndarray, c: int) -> np.ndarray:
    """(v * c) mod P elementwise for a uint64 array and a scalar constant."""
    hi = np.zeros_like(v)
    lo = np.zeros_like(v)
    for b in range(64):
        if (c >> b) & 1:
            lo ^= v << np.uint64(b)
            if b:
                hi ^= v >> np.uint64(64 - b)
    out = lo
    one = np.uint64(1)
    for i in range(64):
        bit = (hi >> np.uint64(i)) & one
        out = out ^ bit * _REDUCE[i]
    return out


def _crc64_lanes(data: bytes) -> int:
    """Table-driven CRC evaluated over parallel lanes.

    The message is front-padded with zero bytes (a no-op for init 0) so it
    splits into 2**k contiguous equal blocks; each block's CRC advances in
    lockstep with numpy, then adjacent blocks fold together with
    crc(A||B) = crc(A)*x^(8*len(B)) + crc(B) over GF(2).
    """
    n = len(data)
    lanes = 1 << max(1, min(12, (n // 384).bit_length()))
    block = -(-n // lanes)
    pad = lanes * block - n
    buf = np.zeros(lanes * block, dtype=np.uint8)
    buf[pad:] = np.frombuffer(data, dtype=np.uint8)
    cols = buf.reshape(lanes, block)
    crc = np.zeros(lanes, dtype=np.uint64)
    table = _CRC_TABLE_NP
    c8, c56 = np.uint64(8), np.uint64(56)
    for j in range(block):
        crc = (crc << c8) ^ table[(crc >> c56) ^ cols[:, j]]
    while len(crc) > 1:
        shift = _SHIFT_POW_CACHE.get(block)
        if shift is None:
            shift = _SHIFT_POW_CACHE[block] = _x_pow_8n(block)
        crc = _mulmod_vec(crc[0::2], shift) ^ crc[1::2]
        block *= 2
    return int(crc[0])


def crc64(data: bytes) -> int:
    """CRC-64/ECMA-182 of ``data``; table-driven, lane-parallel for large
    payloads (the per-step numpy overhead only pays off past ~16 KiB)."""
    if len(data) < 16384:
        return _crc64_scalar(data)
    return _crc64_lanes(data)


# --- timestamps ---------------------------------------------------------------

def timestamp_encode(seconds: float) -> int:
    """Seconds since the Unix epoch to 32.32 fixed point."""
    if seconds < 0:
        seconds = 0.0
    return int(seconds * (1 << 32)) & _MASK64


def timestamp_decode(fixed: int) -> float:
    return fixed / (1 << 32)


# --- header -------------------------------------------------------------------

@dataclass(frozen=True)
class IgtlHeader:
    version: int
    type_name: str
    device_name: str
    timestamp: int  # u64, 32.32 fixed-point seconds
    body_size: int
    crc: int


def _pack_name(name: str, width: int) -> bytes:
    try:
        raw = name.encode("ascii")
    except UnicodeEncodeError as exc:
        raise NameTooLong(f"name {name!r} is not ASCII") from exc
    if len(raw) > width:
        raise NameTooLong(f"name {name!r} exceeds {width} bytes")
    return raw.ljust(width, b"\x00")


def _unpack_name(raw: bytes) -> str:
    raw = raw.split(b"\x00", 1)[0]
    return raw.decode("ascii", errors="replace")


def encode_header(h: IgtlHeader) -> bytes:
    if h.version != PROTOCOL_VERSION:
        raise BadVersion(f"only protocol version {PROTOCOL_VERSION} is supported")
    return _HEADER_STRUCT.pack(
        h.version,
        _pack_name(h.type_name, 12),
        _pack_name(h.device_name, 20),
        h.timestamp & _MASK64,
        h.body_size,
        h.crc & _MASK64,
    )


def decode_header(data: bytes) -> IgtlHeader:
    """Parse the first 58 bytes. Raises Truncated, BadVersion, or
    UnknownType (the exception carries the parsed header so callers can
    skip body_size bytes and stay in sync)."""
    if len(data) < HEADER_SIZE:
        raise Truncated(f"header needs {HEADER_SIZE} bytes, got {len(data)}")
    version, type_raw, device_raw, ts, body_size, crc = _HEADER_STRUCT.unpack(
        data[:HEADER_SIZE])
    if version != PROTOCOL_VERSION:
        raise BadVersion(f"unsupported protocol version {version}")
    header = IgtlHeader(
        version=version,
        type_name=_unpack_name(type_raw),
        device_name=_unpack_name(device_raw),
        timestamp=ts,
        body_size=body_size,
        crc=crc,
    )
    if header.type_name not in KNOWN_TYPES:
        raise UnknownType(header.type_name, header=header)
    return header


# --- TRANSFORM body -----------------------------------------------------------

TRANSFORM_BODY_SIZE = 48


def encode_transform(p: RigidPose) -> bytes:
    """12 big-endian float32: rotation columns, then translation (mm)."""
    cols = p.matrix[:3, :4].T  # rows: basis x, basis y, basis z, translation
    return np.ascontiguousarray(cols, dtype=">f4").tobytes()


def decode_transform(data: bytes) -> RigidPose:
    if len(data) != TRANSFORM_BODY_SIZE:
        raise BadLength(
            f"TRANSFORM body must be {TRANSFORM_BODY_SIZE} bytes, got {len(data)}")
    with np.errstate(invalid="ignore"):  # arbitrary bytes may decode to NaN
        vals = np.frombuffer(data, dtype=">f4").astype(np.float64).reshape(4, 3)
    rotation = vals[:3].T
    translation = vals[3]
    return make_pose(rotation, translation)  # NotRigid propagates


# --- IMAGE body ----------------------------------------------------------------

def _grid_to_image_matrix(grid: GridSpec) -> np.ndarray:
    m = grid.index_to_world_matrix()
    return np.concatenate([m.T.reshape(-1), grid.origin])


def _grid_from_image_matrix(vals: np.ndarray, dims: tuple[int, int, int]) -> GridSpec:
    affine = np.column_stack([vals[:9].reshape(3, 3).T, vals[9:12]])
    try:
        return grid_from_affine(affine, dims)
    except NavfieldError as exc:
        raise BadGeometry(str(exc)) from exc


def encode_image(f: ScalarField | VectorField) -> bytes:
    grid = f.grid
    if max(grid.dims) > 0xFFFF:
        raise BadGeometry("grid dims exceed u16")
    ncomp = 3 if isinstance(f, VectorField) else 1
    nx, ny, nz = grid.dims
    head = _IMAGE_HEAD_STRUCT.pack(
        1,  # image format version
        ncomp,
        SCALAR_FLOAT32,
        ENDIAN_BIG,
        COORD_RAS,
        nx, ny, nz,
        *(float(v) for v in _grid_to_image_matrix(grid)),
        0, 0, 0,
        nx, ny, nz,
    )
    pixels = np.ascontiguousarray(f.data, dtype=">f4").tobytes()
    return head + pixels


def decode_image(data: bytes) -> ScalarField | VectorField:
    if len(data) < IMAGE_HEADER_SIZE:
        raise Truncated(
            f"IMAGE body needs at least {IMAGE_HEADER_SIZE} bytes, got {len(data)}")
    fields = _IMAGE_HEAD_STRUCT.unpack(data[:IMAGE_HEADER_SIZE])
    _version, ncomp, scalar_type, endian, _coord = fields[:5]
    dims = fields[5:8]
    matrix = np.array(fields[8:20], dtype=np.float64)
    sub_off = fields[20:23]
    sub_size = fields[23:26]
    if scalar_type != SCALAR_FLOAT32:
        raise UnsupportedScalarType(f"scalar type code {scalar_type}")
    if endian != ENDIAN_BIG:
        raise UnsupportedScalarType(f"pixel endianness code {endian}")
    if ncomp not in (1, 3):
        raise BadComponentCount(f"{ncomp} components")
    if any(d == 0 for d in dims):
        raise BadGeometry("zero-sized image dimension")
    if sub_off != (0, 0, 0) or sub_size != dims:
        raise BadGeometry("subvolume must cover the full volume in this subset")
    nx, ny, nz = dims
    n_pix = nx * ny * nz * ncomp
    want = IMAGE_HEADER_SIZE + 4 * n_pix
    if len(data) != want:
        raise Truncated(f"IMAGE body must be {want} bytes, got {len(data)}")
    grid = _grid_from_image_matrix(matrix, (nx, ny, nz))
    raw = np.frombuffer(data, dtype=">f4", count=n_pix, offset=IMAGE_HEADER_SIZE)
    with np.errstate(invalid="ignore"):
        arr = raw.astype(np.float32)
    try:
        if ncomp == 3:
            return VectorField(grid=grid, data=arr.reshape(nz, ny, nx, 3),
                               unit=FieldUnit.E_FIELD)
        return ScalarField(grid=grid, data=arr.reshape(nz, ny, nx))
    except Exception as exc:
        raise BadPixelData(str(exc)) from exc


# --- stream framing -------------------------------------------------------------

@dataclass(frozen=True)
class IgtlMessage:
    header: IgtlHeader
    content: RigidPose | ScalarField | VectorField


def encode_message(type_name: str, device_name: str, body: bytes,
                   timestamp: int | None = None,
                   clock=time.time) -> bytes:
    """Frame a body into header + body bytes (CRC computed here)."""
    if timestamp is None:
        timestamp = timestamp_encode(clock())
    header = IgtlHeader(
        version=PROTOCOL_VERSION,
        type_name=type_name,
        device_name=device_name,
        timestamp=timestamp,
        body_size=len(body),
        crc=crc64(body),
    )
    return encode_header(header) + body


def write_message(sink, type_name: str, device_name: str, body: bytes,
                  timestamp: int | None = None, clock=time.time) -> None:
    """Write one framed message to a binary file-like sink."""
    sink.write(encode_message(type_name, device_name, body, timestamp, clock))
    flush = getattr(sink, "flush", None)
    if flush is not None:
        flush()


def write_transform(sink, device_name: str, pose: RigidPose, **kw) -> None:
    write_message(sink, TYPE_TRANSFORM, device_name, encode_transform(pose), **kw)


def write_image(sink, device_name: str, field: ScalarField | VectorField, **kw) -> None:
    write_message(sink, TYPE_IMAGE, device_name, encode_image(field), **kw)


def _read_exact(source, n: int) -> bytes:
    """Read exactly n bytes; b'' at a clean boundary, Truncated mid-object."""
    chunks = []
    got = 0
    while got < n:
        chunk = source.read(n - got)
        if not chunk:
            if got == 0:
                return b""
            raise Truncated(f"stream ended after {got} of {n} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


def _skip_body(source, size: int) -> None:
    remaining = size
    while remaining > 0:
        chunk = source.read(min(remaining, 1 << 20))
        if not chunk:
            raise Truncated("stream ended while skipping a body")
        remaining -= len(chunk)


def read_message(source) -> IgtlMessage | None:
    """Read one framed message from a binary file-like source.

    Returns None on a clean end-of-stream at a message boundary. On
    CrcMismatch or UnknownType the offending body is consumed first, so the
    stream stays positioned at the next header and the caller may simply
    call again.
    """
    raw = _read_exact(source, HEADER_SIZE)
    if not raw:
        return None
    try:
        header = decode_header(raw)
    except UnknownType as exc:
        if exc.header is not None and exc.header.body_size <= MAX_BODY_SIZE:
            _skip_body(source, exc.header.body_size)
        raise
    if header.body_size > MAX_BODY_SIZE:
        raise BodyTooLarge(f"declared body of {header.body_size} bytes")
    body = _read_exact(source, header.body_size)
    if len(body) < header.body_size:
        raise Truncated("body shorter than declared")
    if crc64(body) != header.crc:
        raise CrcMismatch(f"device {header.device_name!r}")
    if header.type_name == TYPE_TRANSFORM:
        content = decode_transform(body)
    else:
        content = decode_image(body)
    return IgtlMessage(header=header, content=content)
