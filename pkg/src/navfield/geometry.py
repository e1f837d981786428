"""Rigid 3-D transforms, voxel-grid geometry, and vector-field transforms.

Conventions used throughout the package:

* world coordinates are millimeters,
* poses are full 4x4 homogeneous matrices validated at construction,
* volume data is row-major over (z, y, x), i.e. stored with shape
  (nz, ny, nx[, 3]) so the x index varies fastest in memory,
* everything here is immutable after construction and safe to share
  between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidFieldData, InvalidGrid, NotRigid

# Drift up to this residual is silently repaired at ingestion (optical
# trackers and float32 wire formats both introduce sub-1e-3 noise); beyond
# it the input is rejected as non-rigid.
RIGID_REPAIR_TOL = 1e-3

_IDENTITY4 = np.eye(4)
_IDENTITY4.setflags(write=False)


def _frozen(a: np.ndarray, dtype=np.float64, shape=None) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    if shape is not None and out.shape != shape:
        raise ValueError(f"expected shape {shape}, got {out.shape}")
    out.setflags(write=False)
    return out


def _orthonormality_residual(r: np.ndarray) -> float:
    return float(np.max(np.abs(r.T @ r - np.eye(3))))


def _polar_orthonormalize(r: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense (polar decomposition)."""
    u, _, vt = np.linalg.svd(r)
    rot = u @ vt
    if np.linalg.det(rot) < 0:
        u[:, -1] = -u[:, -1]
        rot = u @ vt
    return rot


@dataclass(frozen=True, eq=False)
class RigidPose:
    """A 4x4 homogeneous coil-placement transform.

    The rotation block is orthonormal with det +1 and the bottom row is
    exactly (0, 0, 0, 1); construction goes through :func:`make_pose` or
    :func:`pose_from_matrix`, which enforce (and if needed repair) this.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix, shape=(4, 4))
        object.__setattr__(self, "matrix", m)
        if not np.isfinite(m).all():
            raise NotRigid("pose matrix has non-finite entries")
        if not np.array_equal(m[3], (0.0, 0.0, 0.0, 1.0)):
            raise NotRigid(f"bottom row must be (0,0,0,1), got {m[3]}")
        r = m[:3, :3]
        resid = _orthonormality_residual(r)
        if resid > 1e-6:
            raise NotRigid(f"rotation block residual {resid:.3g} exceeds 1e-6")
        if np.linalg.det(r) <= 0:
            raise NotRigid("rotation block has non-positive determinant")

    @property
    def rotation(self) -> np.ndarray:
        """3x3 rotation block (read-only view)."""
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        """Translation in mm (read-only view)."""
        return self.matrix[:3, 3]

    def is_identity(self) -> bool:
        return np.array_equal(self.matrix, _IDENTITY4)

    @staticmethod
    def identity() -> "RigidPose":
        return RigidPose(_IDENTITY4)

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        """Transform an (..., 3) array of points (mm)."""
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def apply_vectors(self, vecs: np.ndarray) -> np.ndarray:
        """Rotate an (..., 3) array of direction vectors (no translation)."""
        vecs = np.asarray(vecs)
        return vecs @ self.rotation.T.astype(vecs.dtype, copy=False)


def make_pose(rotation, translation) -> RigidPose:
    """Build a validated pose from a 3x3 rotation and a translation (mm).

    Rotations within ``RIGID_REPAIR_TOL`` of orthonormal are snapped to the
    nearest rotation via polar decomposition; anything further off, or any
    reflection, raises :class:`NotRigid`.
    """
    r = np.array(rotation, dtype=np.float64)
    t = np.array(translation, dtype=np.float64).reshape(3)
    if r.shape != (3, 3):
        raise NotRigid(f"rotation must be 3x3, got {r.shape}")
    if not (np.isfinite(r).all() and np.isfinite(t).all()):
        raise NotRigid("non-finite pose input")
    resid = _orthonormality_residual(r)
    if resid > RIGID_REPAIR_TOL:
        raise NotRigid(f"orthonormality residual {resid:.3g} exceeds {RIGID_REPAIR_TOL}")
    if np.linalg.det(r) <= 0:
        raise NotRigid("determinant must be +1 (reflections rejected)")
    if resid > 1e-12:
        r = _polar_orthonormalize(r)
    m = np.eye(4)
    m[:3, :3] = r
    m[:3, 3] = t
    return RigidPose(m)


def pose_from_matrix(matrix) -> RigidPose:
    """Validate a full 4x4 matrix through the :func:`make_pose` repair path.

    The bottom row must be (0,0,0,1) to within 1e-9.
    """
    m = np.array(matrix, dtype=np.float64)
    if m.shape != (4, 4):
        raise NotRigid(f"pose matrix must be 4x4, got {m.shape}")
    if not np.isfinite(m).all():
        raise NotRigid("non-finite pose input")
    if np.max(np.abs(m[3] - (0.0, 0.0, 0.0, 1.0))) > 1e-9:
        raise NotRigid(f"bottom row must be (0,0,0,1), got {m[3]}")
    return make_pose(m[:3, :3], m[:3, 3])


def compose(a: RigidPose, b: RigidPose) -> RigidPose:
    """Pose applying ``b`` first, then ``a`` (matrix product a.matrix @ b.matrix)."""
    m = a.matrix @ b.matrix
    return make_pose(m[:3, :3], m[:3, 3])


def invert(p: RigidPose) -> RigidPose:
    """Closed-form rigid inverse (R^T, -R^T t)."""
    rt = p.rotation.T
    return make_pose(rt, -rt @ p.translation)


def rotation_about(axis, angle_rad: float) -> np.ndarray:
    """Rotation matrix about a (not necessarily unit) axis, Rodrigues form."""
    ax = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(ax)
    if n == 0:
        raise NotRigid("zero rotation axis")
    x, y, z = ax / n
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    cc = 1.0 - c
    return np.array([
        [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
        [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
        [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
    ])


# --- voxel lattice ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridSpec:
    """Geometry of a voxel lattice.

    ``origin`` is the world position (mm) of the center of voxel (0,0,0);
    ``axes`` holds unit direction cosines as columns; ``spacing`` is mm per
    voxel step along each axis.
    """

    dims: tuple[int, int, int]
    spacing: np.ndarray
    origin: np.ndarray
    axes: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise InvalidGrid(f"dims must be three positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        spacing = _frozen(self.spacing, shape=(3,))
        origin = _frozen(self.origin, shape=(3,))
        axes = _frozen(self.axes, shape=(3, 3))
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "axes", axes)
        if not (np.isfinite(spacing).all() and np.isfinite(origin).all()
                and np.isfinite(axes).all()):
            raise InvalidGrid("non-finite grid geometry")
        if np.any(spacing <= 0):
            raise InvalidGrid(f"spacing must be positive, got {spacing}")
        resid = float(np.max(np.abs(axes.T @ axes - np.eye(3))))
        if resid > 1e-6:
            raise InvalidGrid(f"axes not orthonormal (residual {resid:.3g})")

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def index_to_world_matrix(self) -> np.ndarray:
        """3x3 matrix mapping fractional (i,j,k) steps to world offsets."""
        return self.axes * self.spacing[np.newaxis, :]

    def voxel_centers(self) -> np.ndarray:
        """World coordinates of all voxel centers, (n, 3), in data order.

        Row n corresponds to flat data index n of the (z, y, x) row-major
        layout: n = (k * ny + j) * nx + i.
        """
        nx, ny, nz = self.dims
        kk, jj, ii = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx),
                                 indexing="ij")
        ijk = np.stack([ii, jj, kk], axis=-1).reshape(-1, 3).astype(np.float64)
        return ijk_to_world(self, ijk)

    def same_lattice(self, other: "GridSpec") -> bool:
        return (self.dims == other.dims
                and np.array_equal(self.spacing, other.spacing)
                and np.array_equal(self.origin, other.origin)
                and np.array_equal(self.axes, other.axes))


def ijk_to_world(g: GridSpec, ijk) -> np.ndarray:
    """Map continuous voxel indices (..., 3) to world mm.

    Indices may be fractional and out of bounds.
    """
    ijk = np.asarray(ijk, dtype=np.float64)
    return ijk @ g.index_to_world_matrix().T + g.origin


def world_to_ijk(g: GridSpec, pts) -> np.ndarray:
    """Exact inverse of :func:`ijk_to_world` for (..., 3) points."""
    pts = np.asarray(pts, dtype=np.float64)
    # axes orthonormal, so the inverse of axes @ diag(spacing) is
    # diag(1/spacing) @ axes^T
    return ((pts - g.origin) @ g.axes) / g.spacing


def transform_grid(g: GridSpec, p: RigidPose) -> GridSpec:
    """Grid with origin and axes carried through a rigid pose."""
    return GridSpec(
        dims=g.dims,
        spacing=g.spacing,
        origin=p.apply_points(g.origin),
        axes=p.rotation @ g.axes,
    )


def grid_from_affine(affine, dims: tuple[int, int, int],
                     snap_tol: float = 1e-3) -> GridSpec:
    """Recover a GridSpec from a 3x4 index-to-world affine.

    Column norms give the spacing; the normalized columns must be within
    ``snap_tol`` of an orthonormal frame (float32 storage drift) and are
    snapped to the nearest one, preserving handedness. Sheared affines
    raise InvalidGrid.
    """
    a = np.asarray(affine, dtype=np.float64)
    if a.shape != (3, 4):
        raise InvalidGrid(f"affine must be 3x4, got {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidGrid("non-finite affine")
    cols = a[:, :3]
    spacing = np.linalg.norm(cols, axis=0)
    if np.any(spacing <= 0):
        raise InvalidGrid("affine has a zero-length axis column")
    axes = cols / spacing
    u, _, vt = np.linalg.svd(axes)
    snapped = u @ vt  # nearest orthonormal frame, handedness preserved
    if np.max(np.abs(snapped - axes)) > snap_tol:
        raise InvalidGrid("affine axes are not orthonormal")
    return GridSpec(dims=dims, spacing=spacing, origin=a[:, 3], axes=snapped)


# --- fields on the lattice --------------------------------------------------

class FieldUnit(Enum):
    E_FIELD = "E_FIELD"
    DADT = "DADT"


_FIELD_DTYPES = (np.float32, np.float64)


def _check_field_array(data, grid: GridSpec, vector: bool) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in _FIELD_DTYPES:
        arr = arr.astype(np.float64)
    nx, ny, nz = grid.dims
    want = (nz, ny, nx, 3) if vector else (nz, ny, nx)
    if arr.shape != want:
        raise InvalidFieldData(f"data shape {arr.shape} does not match grid {want}")
    arr = np.ascontiguousarray(arr)
    if not np.isfinite(arr).all():
        raise InvalidFieldData("field contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class VectorField:
    """Dense 3-vector volume, shape (nz, ny, nx, 3), x fastest in memory."""

    grid: GridSpec
    data: np.ndarray
    unit: FieldUnit

    def __post_init__(self):
        object.__setattr__(self, "data", _check_field_array(self.data, self.grid, True))
        if not isinstance(self.unit, FieldUnit):
            raise InvalidFieldData(f"unit must be a FieldUnit, got {self.unit!r}")

    @property
    def flat(self) -> np.ndarray:
        """(n, 3) view in data order."""
        return self.data.reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Dense non-negative scalar volume (V/m), shape (nz, ny, nx)."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        arr = _check_field_array(self.data, self.grid, False)
        if float(arr.min(initial=0.0)) < 0.0:
            raise InvalidFieldData("scalar field values must be non-negative")
        object.__setattr__(self, "data", arr)

    @property
    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)


def transform_vector_field(f: VectorField, p: RigidPose) -> VectorField:
    """Rigidly move a vector field: grid carried through ``p`` and every
    voxel's vector rotated by the rotation block.

    The identity pose is a bit-exact no-op.
    """
    if p.is_identity():
        return f
    r = p.rotation.astype(f.data.dtype, copy=False)
    data = f.data @ r.T
    return VectorField(grid=transform_grid(f.grid, p), data=data, unit=f.unit)
