"""Exception hierarchy shared across the package.

Every failure mode that can reach a caller is a typed subclass of
NavfieldError, so network-facing decoders can guarantee "typed error or
valid value, never a crash".
"""


class NavfieldError(Exception):
    """Base class for all errors raised by this package."""


# --- geometry ---------------------------------------------------------------

class NotRigid(NavfieldError):
    """Matrix is not a proper rigid transform (reflection, shear, or drift
    beyond the repair tolerance)."""


class InvalidGrid(NavfieldError):
    """GridSpec invariants violated (non-positive spacing, bad axes...)."""


class InvalidFieldData(NavfieldError):
    """Field payload violates its invariants (wrong length, NaN, negative
    magnitude...)."""


# --- field engine -----------------------------------------------------------

class InvalidParams(NavfieldError):
    """Coil parameters out of range."""


class SingularVoxel(NavfieldError):
    """A voxel center coincides with a coil element position."""

    def __init__(self, voxel_index: int, ijk: tuple[int, int, int]):
        self.voxel_index = voxel_index
        self.ijk = ijk
        super().__init__(f"voxel {voxel_index} (i,j,k)={ijk} coincides with a coil element")


class SingularPoint(NavfieldError):
    """A probe point lies on the coil winding."""


class WrongUnitTag(NavfieldError):
    """Vector field carries the wrong unit tag for this operation."""


class GridMismatch(NavfieldError):
    """Two fields do not share the same grid (or kind)."""


# --- wire protocol ----------------------------------------------------------

class ProtocolError(NavfieldError):
    """Base class for codec and framing failures."""


class Truncated(ProtocolError):
    """Fewer bytes than the declared layout requires."""


class UnknownType(ProtocolError):
    """Message type outside the supported subset."""

    def __init__(self, type_name: str, header=None):
        self.type_name = type_name
        self.header = header
        super().__init__(f"unsupported message type {type_name!r}")


class CrcMismatch(ProtocolError):
    """Body checksum does not match the header CRC."""


class BadLength(ProtocolError):
    """Body length is wrong for its message type."""


class NameTooLong(ProtocolError):
    """Type or device name exceeds its fixed field (or is not ASCII)."""


class BadVersion(ProtocolError):
    """Header version outside the supported subset."""


class UnsupportedScalarType(ProtocolError):
    """Image pixel encoding outside the float32 big-endian subset."""


class BadComponentCount(ProtocolError):
    """Image component count is neither 1 nor 3."""


class BadGeometry(ProtocolError):
    """Image matrix does not describe a valid voxel lattice."""


class BadPixelData(ProtocolError):
    """Pixel payload violates field invariants (non-finite, negative
    magnitude)."""


class BodyTooLarge(ProtocolError):
    """Declared body size exceeds the sanity cap."""


# --- volume / mesh io -------------------------------------------------------

class VolumeError(NavfieldError):
    """Base class for file-format failures."""


class BadMagic(VolumeError):
    """Not a single-file NIfTI-1 volume."""


class UnsupportedDatatype(VolumeError):
    """Voxel datatype outside the supported subset."""


class NoSform(VolumeError):
    """Volume has no sform affine; qform decoding is out of scope."""


class InvalidVolumeData(VolumeError):
    """Structurally broken volume (bad dims, non-orthogonal affine,
    out-of-contract values)."""


class AsciiStlUnsupported(VolumeError):
    """ASCII STL detected; only binary STL is supported."""


class InvalidMesh(VolumeError):
    """Mesh violates SurfaceMesh invariants (degenerate triangle,
    out-of-range index, non-finite vertex)."""


# --- streaming session ------------------------------------------------------

class BindFailure(NavfieldError):
    """Could not bind a listen endpoint at startup."""


class AssetLoadFailure(NavfieldError):
    """Configured asset missing or unreadable at startup."""


class SessionClosed(NavfieldError):
    """Pose submitted to a stopped session."""


class RemoteTimeout(NavfieldError):
    """Remote predictor did not answer within its deadline."""


class ConnectionLost(NavfieldError):
    """Remote predictor connection dropped mid-call."""


# --- bench harness ----------------------------------------------------------

class InvalidScheme(NavfieldError):
    """Unparseable trajectory scheme."""
