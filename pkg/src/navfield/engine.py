"""Analytic figure-8 coil physics and the pluggable field-predictor contract.

The coil is discretized into point magnetic dipoles whose moment
time-derivatives superpose into dA/dt at every voxel center:

    dA/dt(r) = (mu0 / 4 pi) * sum_k  (dm_k/dt) x (r - r_k) / |r - r_k|^3

The primary electric field is E = -dA/dt; its per-voxel magnitude is what
the streaming loop ships downstream. A slow line-integral formulation of
the same coil (``oracle_dadt``) exists for tests and calibration and shares
no code with the dipole engine.

Units: coil geometry and world coordinates in mm, moment rates in SI
(A m^2/s), fields in V/m. All physics happen in SI internally.
"""

from __future__ import annotations

import contextlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

try:
    from threadpoolctl import ThreadpoolController
    _BLAS_CONTROL = ThreadpoolController()
except ImportError:  # pragma: no cover
    _BLAS_CONTROL = None


def _single_threaded_blas():
    """BLAS must not spawn its own threads inside our chunk workers; on a
    two-core host the oversubscription roughly doubles the field latency."""
    if _BLAS_CONTROL is None:
        return contextlib.nullcontext()
    return _BLAS_CONTROL.limit(limits=1, user_api="blas")

from .errors import (
    GridMismatch,
    InvalidParams,
    SingularPoint,
    SingularVoxel,
    WrongUnitTag,
)
from .geometry import (
    FieldUnit,
    GridSpec,
    RigidPose,
    ScalarField,
    VectorField,
)

MU0_OVER_4PI = 1e-7  # T m / A

_MM = 1e-3
# Coincidence guard: 1e-9 mm in meters, squared for distance comparisons.
_SINGULAR_MM = 1e-9
_SINGULAR_M2 = (_SINGULAR_MM * _MM) ** 2
# Points whose (possibly single-precision) squared distance falls below this
# get re-checked exactly in float64; 1 mm of slack dwarfs float32 rounding.
_CANDIDATE_M2 = 1e-6

_CHUNK = 16384


@dataclass(frozen=True)
class CoilParams:
    """Figure-8 geometry and drive. Defaults approximate a 70 mm
    two-wing treatment coil; they are conventional magnitudes, not
    manufacturer data."""

    wing_radius: float = 35.0       # mm
    wing_separation: float = 70.0   # mm, center to center
    turns: int = 9
    dI_dt: float = 1e8              # A/s
    segments_per_wing: int = 64

    def __post_init__(self):
        if not (self.wing_radius > 0):
            raise InvalidParams(f"wing_radius must be > 0, got {self.wing_radius}")
        if self.wing_separation < 0:
            raise InvalidParams("wing_separation must be >= 0")
        if self.turns < 1:
            raise InvalidParams("turns must be >= 1")
        if self.segments_per_wing < 1:
            raise InvalidParams("segments_per_wing must be >= 1")
        if not np.isfinite(self.dI_dt):
            raise InvalidParams("dI_dt must be finite")


@dataclass(frozen=True, eq=False)
class CoilModel:
    """Discretized coil: point dipole elements in the coil frame.

    ``positions`` are (K, 3) mm; ``moment_rates`` are (K, 3) dm/dt in
    A m^2/s. The coil frame has +z pointing from the coil face toward the
    head and the handle along +y.
    """

    positions: np.ndarray
    moment_rates: np.ndarray
    name: str = "coil"

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64)
        mom = np.array(self.moment_rates, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape != mom.shape:
            raise InvalidParams("positions and moment_rates must both be (K, 3)")
        if len(pos) < 2:
            raise InvalidParams("a coil needs at least 2 elements")
        if not (np.isfinite(pos).all() and np.isfinite(mom).all()):
            raise InvalidParams("non-finite coil element")
        pos.setflags(write=False)
        mom.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "moment_rates", mom)

    @property
    def n_elements(self) -> int:
        return len(self.positions)

    def is_planar_axial(self) -> bool:
        """True when all elements sit in the z=0 plane with moments along z
        (the figure-8 case), enabling the two-component fast path."""
        return bool(np.all(self.positions[:, 2] == 0.0)
                    and np.all(self.moment_rates[:, :2] == 0.0))


def _disk_tiling(n: int, radius_mm: float) -> np.ndarray:
    """n equal-area sample points covering a disk (Fermat spiral layout)."""
    k = np.arange(n) + 0.5
    r = radius_mm * np.sqrt(k / n)
    theta = k * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


def build_figure8(params: CoilParams) -> CoilModel:
    """Discretize a figure-8 coil into dipole elements.

    A planar current loop is exactly equivalent to a uniform sheet of
    normal dipoles over the disk it bounds, so each wing becomes
    ``segments_per_wing`` equal-moment dipoles tiling its disk. The right
    wing mirrors the left's layout through the x=0 plane and carries the
    opposite sign, which keeps the whole model mirror-symmetric the way a
    real figure-8 winding is.
    """
    n = params.segments_per_wing
    half = params.wing_separation / 2.0
    off = _disk_tiling(n, params.wing_radius)
    m_each = (params.turns * params.dI_dt
              * np.pi * (params.wing_radius * _MM) ** 2 / n)
    left = np.column_stack([off[:, 0] - half, off[:, 1], np.zeros(n)])
    right = np.column_stack([half - off[:, 0], off[:, 1], np.zeros(n)])
    moments = np.zeros((2 * n, 3))
    moments[:n, 2] = m_each
    moments[n:, 2] = -m_each
    return CoilModel(
        positions=np.vstack([left, right]),
        moment_rates=moments,
        name=(f"figure8-r{params.wing_radius:g}mm-"
              f"sep{params.wing_separation:g}mm-n{n}"),
    )


def _raise_singular(flat_index: int, grid: GridSpec | None):
    if grid is None:
        ijk = (-1, -1, -1)
    else:
        nx, ny, _ = grid.dims
        k, rem = divmod(flat_index, nx * ny)
        j, i = divmod(rem, nx)
        ijk = (i, j, k)
    raise SingularVoxel(flat_index, ijk)


def _exact_singular_check(points_m: np.ndarray, elems_m: np.ndarray,
                          candidates: np.ndarray, grid: GridSpec | None,
                          report_indices: np.ndarray | None = None):
    for idx in candidates:
        d = np.linalg.norm(points_m[idx] - elems_m, axis=1)
        if float(d.min()) < _SINGULAR_MM * _MM:
            flat = int(idx if report_indices is None else report_indices[idx])
            _raise_singular(flat, grid)


def _dadt_planar(coil: CoilModel, pose: RigidPose, points_mm: np.ndarray,
                 dtype, grid: GridSpec | None) -> np.ndarray:
    """Fast path for planar coils with axial moments.

    Works in the coil frame, where the field has no z component:
    dA/dt = c * [ (z_hat x p) * sum_k w_k m_k  -  sum_k w_k m_k (z_hat x r_k) ]
    with w_k = 1/|p - r_k|^3. The squared distances for a whole chunk come
    out of one augmented matrix product ([x, y, |p|^2, 1] against element
    constants), and the three weighted sums out of a second one. Chunks are
    split across two threads (numpy releases the GIL on the large ops);
    this loop is the latency budget of the whole pipeline.
    """
    with _single_threaded_blas():
        return _dadt_planar_body(coil, pose, points_mm, dtype, grid)


def _dadt_planar_body(coil, pose, points_mm, dtype, grid):
    rot = pose.rotation.astype(dtype)
    pc = (points_mm.astype(dtype) - pose.translation.astype(dtype)) @ rot
    pc *= dtype(_MM)
    e2 = coil.positions[:, :2] * _MM
    sv = coil.moment_rates[:, 2]

    n = len(pc)
    k = len(e2)
    # aug @ emat = |p - r_k|^2 for the whole chunk in one gemm
    aug = np.empty((n, 4), dtype)
    aug[:, :2] = pc[:, :2]
    np.einsum("ij,ij->i", pc, pc, out=aug[:, 2])
    aug[:, 3] = 1.0
    emat = np.empty((4, k), dtype)
    emat[0] = -2.0 * e2[:, 0]
    emat[1] = -2.0 * e2[:, 1]
    emat[2] = 1.0
    emat[3] = np.einsum("ij,ij->i", e2, e2)
    # fused weighted-sum constants: (m_k, m_k (z x r_k)_x, m_k (z x r_k)_y)
    constd = np.stack([sv, -e2[:, 1] * sv, e2[:, 0] * sv], axis=1).astype(dtype)
    pz2 = pc[:, 2] ** 2

    acc = np.empty((n, 3), dtype)

    def run_span(lo0: int, hi0: int):
        if hi0 <= lo0:
            return
        d2 = np.empty((min(_CHUNK, hi0 - lo0), k), dtype)
        w = np.empty_like(d2)
        for lo in range(lo0, hi0, _CHUNK):
            hi = min(lo + _CHUNK, hi0)
            m = hi - lo
            d2m, wm = d2[:m], w[:m]
            np.matmul(aug[lo:hi], emat, out=d2m)
            # elements lie in the z=0 plane, so d2 >= z^2: chunks farther
            # than the guard distance from the plane skip the scan
            if float(pz2[lo:hi].min()) < _CANDIDATE_M2 \
                    and float(d2m.min()) < _CANDIDATE_M2:
                cand = lo + np.nonzero(d2m.min(axis=1) < _CANDIDATE_M2)[0]
                pts64 = ((points_mm[cand] - pose.translation)
                         @ pose.rotation) * _MM
                _exact_singular_check(pts64, coil.positions * _MM,
                                      np.arange(len(cand)), grid,
                                      report_indices=cand)
            np.sqrt(d2m, out=wm)
            wm *= d2m
            np.divide(1.0, wm, out=wm)
            np.matmul(wm, constd, out=acc[lo:hi])

    if n >= 4 * _CHUNK:
        split = (n // (2 * _CHUNK)) * _CHUNK
        with ThreadPoolExecutor(2) as pool:
            futs = [pool.submit(run_span, 0, split),
                    pool.submit(run_span, split, n)]
            for f in futs:
                f.result()
    else:
        run_span(0, n)

    s0 = acc[:, 0]
    fx = -aug[:, 1] * s0
    fx -= acc[:, 1]
    fy = aug[:, 0] * s0
    fy -= acc[:, 2]
    f_coil = np.stack([fx, fy], axis=1)
    out = f_coil @ rot[:, :2].T
    out *= dtype(MU0_OVER_4PI)
    return out


def _dadt_general(coil: CoilModel, pose: RigidPose, points_mm: np.ndarray,
                  dtype, grid: GridSpec | None) -> np.ndarray:
    """Reference path: accumulate every element's dipole term in the world
    frame, straight from the superposition formula."""
    pts = (points_mm * _MM).astype(np.float64)
    elems = pose.apply_points(coil.positions) * _MM
    moments = pose.apply_vectors(coil.moment_rates)
    out = np.zeros((len(pts), 3))
    mind2 = np.full(len(pts), np.inf)
    for k in range(len(elems)):
        d = pts - elems[k]
        d2 = np.einsum("ij,ij->i", d, d)
        np.minimum(mind2, d2, out=mind2)
        w = 1.0 / (d2 * np.sqrt(d2))
        out += np.cross(np.broadcast_to(moments[k], d.shape), d) * w[:, None]
    if float(mind2.min()) < _CANDIDATE_M2:
        cand = np.nonzero(mind2 < _CANDIDATE_M2)[0]
        _exact_singular_check(pts, elems, cand, grid)
    out *= MU0_OVER_4PI
    return out.astype(dtype, copy=False)


def dadt_at_points(coil: CoilModel, pose: RigidPose, points_mm: np.ndarray,
                   dtype=np.float64, grid: GridSpec | None = None) -> np.ndarray:
    """dA/dt (V/m) of a posed coil at arbitrary world points (mm), (n, 3)."""
    points_mm = np.asarray(points_mm, dtype=np.float64)
    if coil.is_planar_axial():
        return _dadt_planar(coil, pose, points_mm, np.dtype(dtype).type, grid)
    return _dadt_general(coil, pose, points_mm, np.dtype(dtype).type, grid)


def compute_dadt(coil: CoilModel, pose: RigidPose, grid: GridSpec, *,
                 dtype=np.float64, points: np.ndarray | None = None) -> VectorField:
    """Evaluate dA/dt on every voxel center of ``grid``.

    Element positions are carried through ``pose`` and moments rotated with
    it. ``points`` may pass in ``grid.voxel_centers()`` precomputed by a
    caller that evaluates the same grid repeatedly. Raises SingularVoxel if
    a voxel center lands on an element.
    """
    if points is None:
        points = grid.voxel_centers()
    data = dadt_at_points(coil, pose, points, dtype=dtype, grid=grid)
    nx, ny, nz = grid.dims
    return VectorField(grid=grid, data=data.reshape(nz, ny, nx, 3),
                       unit=FieldUnit.DADT)


def primary_efield(dadt: VectorField) -> VectorField:
    """Primary electric field E = -dA/dt, componentwise.

    The secondary (charge accumulation) field needs a conductor model and
    is deliberately out of scope; a conductivity-aware backend would plug
    in through the Predictor contract instead.
    """
    if dadt.unit is not FieldUnit.DADT:
        raise WrongUnitTag(f"expected DADT input, got {dadt.unit}")
    return VectorField(grid=dadt.grid, data=-dadt.data, unit=FieldUnit.E_FIELD)


def magnitude(f: VectorField) -> ScalarField:
    """Per-voxel Euclidean norm on the same grid."""
    data = np.sqrt(np.einsum("...i,...i->...", f.data, f.data))
    return ScalarField(grid=f.grid, data=data)


def normalized_error(pred, ref) -> float:
    """||pred - ref||_2 / ||ref||_2 over all components.

    Returns 0.0 when both fields are zero, +inf when the reference is zero
    but the prediction is not. Not symmetric; the denominator always uses
    the reference.
    """
    if type(pred) is not type(ref):
        raise GridMismatch(f"cannot compare {type(pred).__name__} with "
                           f"{type(ref).__name__}")
    if not pred.grid.same_lattice(ref.grid):
        raise GridMismatch("fields live on different grids")
    a = pred.data.astype(np.float64, copy=False)
    b = ref.data.astype(np.float64, copy=False)
    ref_norm = float(np.linalg.norm(b))
    diff_norm = float(np.linalg.norm(a - b))
    if ref_norm == 0.0:
        return 0.0 if diff_norm == 0.0 else float("inf")
    return diff_norm / ref_norm


# --- independent line-integral oracle ----------------------------------------

def oracle_dadt(params: CoilParams, pose: RigidPose, points_mm,
                quadrature_n: int) -> np.ndarray:
    """dA/dt by direct line integral over the two circular windings.

        dA/dt(r) = (mu0/4pi) * turns * dI_dt * loop_integral dl' / |r - r'|

    signed per wing, trapezoidal quadrature with ``quadrature_n`` segments.
    Used only by tests and calibration; shares no code with the dipole
    engine.
    """
    if quadrature_n < 256:
        raise InvalidParams("quadrature_n must be >= 256")
    pts_w = np.asarray(points_mm, dtype=np.float64).reshape(-1, 3)
    # work in the coil frame; rotate the result back at the end
    rot = pose.rotation
    pts = (pts_w - pose.translation) @ rot * _MM
    radius = params.wing_radius * _MM
    half = params.wing_separation / 2.0 * _MM

    # exact point-to-circle distance for the singularity guard
    for cx in (-half, half):
        rho = np.hypot(pts[:, 0] - cx, pts[:, 1])
        dist = np.sqrt((rho - radius) ** 2 + pts[:, 2] ** 2)
        if float(dist.min()) < _SINGULAR_MM * _MM:
            raise SingularPoint(
                f"probe point {int(dist.argmin())} lies on the winding")

    theta = 2.0 * np.pi * np.arange(quadrature_n + 1) / quadrature_n
    ring = np.stack([radius * np.cos(theta), radius * np.sin(theta),
                     np.zeros_like(theta)], axis=1)
    out = np.zeros_like(pts)
    chunk = 2048
    for cx, sign in ((-half, 1.0), (half, -1.0)):
        nodes = ring + np.array([cx, 0.0, 0.0])
        dl = nodes[1:] - nodes[:-1]
        for lo in range(0, len(pts), chunk):
            hi = min(lo + chunk, len(pts))
            diff = pts[lo:hi, None, :] - nodes[None, :, :]
            inv = 1.0 / np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            w = 0.5 * (inv[:, :-1] + inv[:, 1:])
            out[lo:hi] += sign * (w @ dl)
    out *= MU0_OVER_4PI * params.turns * params.dI_dt
    return out @ rot.T


# --- predictor contract -------------------------------------------------------

@runtime_checkable
class Predictor(Protocol):
    """Anything that turns a coil pose into a scalar field on a fixed grid.

    Implementations are deterministic (same pose in, identical field out
    for the analytic backend), report their grid, and record the wall-clock
    duration of the most recent call in ``last_compute_s``. One instance
    handles one predict call at a time.
    """

    grid: GridSpec
    last_compute_s: float

    def predict(self, pose: RigidPose) -> ScalarField: ...


@dataclass
class AnalyticPredictor:
    """Figure-8 surrogate predictor: build_figure8 -> compute_dadt ->
    primary_efield -> magnitude.

    Evaluates in float32 by default: the transport downstream is float32
    anyway, and single precision roughly halves the per-call latency.
    """

    params: CoilParams
    grid: GridSpec
    dtype: type = np.float32
    last_compute_s: float = 0.0
    _coil: CoilModel = field(init=False, repr=False)
    _points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._coil = build_figure8(self.params)
        self._points = self.grid.voxel_centers()

    def predict(self, pose: RigidPose) -> ScalarField:
        t0 = time.perf_counter()
        dadt = compute_dadt(self._coil, pose, self.grid, dtype=self.dtype,
                            points=self._points)
        result = magnitude(primary_efield(dadt))
        self.last_compute_s = time.perf_counter() - t0
        return result


def analytic_predictor(params: CoilParams, grid: GridSpec, *,
                       dtype=np.float32) -> AnalyticPredictor:
    return AnalyticPredictor(params=params, grid=grid, dtype=dtype)
