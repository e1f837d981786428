"""Projecting field volumes onto geometry: trilinear sampling at mesh
vertices and along fiber polylines, plus colormapping for display.

Sampling outside the grid returns 0 rather than raising: the brain mesh
routinely extends past the reduced field-of-view box, and zero is the
physically sensible exterior value for a localized field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidFieldData
from .geometry import GridSpec, ScalarField, world_to_ijk
from .volio import SurfaceMesh


@dataclass(frozen=True, eq=False)
class FiberBundle:
    """A list of polylines (each an (m, 3) array of mm points, m >= 2)."""

    polylines: tuple

    def __post_init__(self):
        lines = []
        for line in self.polylines:
            arr = np.array(line, dtype=np.float64).reshape(-1, 3)
            if len(arr) < 2:
                raise InvalidFieldData("fiber polyline needs at least 2 points")
            if not np.isfinite(arr).all():
                raise InvalidFieldData("non-finite fiber point")
            arr.setflags(write=False)
            lines.append(arr)
        object.__setattr__(self, "polylines", tuple(lines))

    @property
    def n_polylines(self) -> int:
        return len(self.polylines)


def fiber_bundle_from_json(text: str | bytes) -> FiberBundle:
    """Parse the fiber exchange format: a JSON array of polylines, each a
    list of [x, y, z] points in mm."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidFieldData(f"fiber JSON: {exc}") from exc
    if not isinstance(obj, list):
        raise InvalidFieldData("fiber JSON must be an array of polylines")
    return FiberBundle(polylines=tuple(obj))


def fiber_bundle_to_json(fb: FiberBundle) -> str:
    return json.dumps([line.tolist() for line in fb.polylines])


def _sample_grid_indices(data: np.ndarray, grid: GridSpec,
                         ijk: np.ndarray) -> np.ndarray:
    """Trilinear interpolation at fractional (..., 3) indices; anything with
    an index < 0 or > dim-1 samples to 0."""
    nx, ny, nz = grid.dims
    dims = np.array([nx, ny, nz], dtype=np.float64)
    inside = np.all((ijk >= 0.0) & (ijk <= dims - 1.0), axis=-1)

    clipped = np.clip(ijk, 0.0, dims - 1.0)
    lo = np.floor(clipped).astype(np.int64)
    lo = np.minimum(lo, (dims - 2).astype(np.int64))
    lo = np.maximum(lo, 0)
    frac = clipped - lo
    if min(nx, ny, nz) == 1:
        # a singleton axis has no second corner; force weight 0 there
        single = np.array([nx, ny, nz]) == 1
        frac[..., single] = 0.0
    i0, j0, k0 = lo[..., 0], lo[..., 1], lo[..., 2]
    i1 = np.minimum(i0 + 1, nx - 1)
    j1 = np.minimum(j0 + 1, ny - 1)
    k1 = np.minimum(k0 + 1, nz - 1)
    fi, fj, fk = frac[..., 0], frac[..., 1], frac[..., 2]

    d = data.astype(np.float64, copy=False)
    c000 = d[k0, j0, i0]
    c100 = d[k0, j0, i1]
    c010 = d[k0, j1, i0]
    c110 = d[k0, j1, i1]
    c001 = d[k1, j0, i0]
    c101 = d[k1, j0, i1]
    c011 = d[k1, j1, i0]
    c111 = d[k1, j1, i1]

    wi0, wi1 = 1.0 - fi, fi
    wj0, wj1 = 1.0 - fj, fj
    wk0, wk1 = 1.0 - fk, fk
    out = (c000 * wi0 * wj0 * wk0 + c100 * wi1 * wj0 * wk0
           + c010 * wi0 * wj1 * wk0 + c110 * wi1 * wj1 * wk0
           + c001 * wi0 * wj0 * wk1 + c101 * wi1 * wj0 * wk1
           + c011 * wi0 * wj1 * wk1 + c111 * wi1 * wj1 * wk1)
    return np.where(inside, out, 0.0)


def sample_trilinear(f: ScalarField, p) -> float | np.ndarray:
    """Sample the field at world point(s) ``p`` (mm), shape (3,) or (..., 3).

    Returns a scalar for a single point, an array otherwise.
    """
    pts = np.asarray(p, dtype=np.float64)
    single = pts.ndim == 1
    ijk = world_to_ijk(f.grid, pts)
    out = _sample_grid_indices(f.data, f.grid, np.atleast_2d(ijk))
    return float(out[0]) if single else out.reshape(pts.shape[:-1])


@dataclass(frozen=True)
class ProjectionStats:
    vmin: float
    vmax: float
    argmax: int


def project_to_mesh(f: ScalarField, m: SurfaceMesh) -> tuple[np.ndarray, ProjectionStats]:
    """Sample the field at every mesh vertex.

    Returns (values, stats) where values has one entry per vertex and stats
    carries (min, max, argmax vertex index).
    """
    if m.n_vertices == 0:
        return np.zeros(0), ProjectionStats(0.0, 0.0, -1)
    values = sample_trilinear(f, m.vertices)
    stats = ProjectionStats(vmin=float(values.min()), vmax=float(values.max()),
                            argmax=int(values.argmax()))
    return values, stats


def project_to_fibers(f: ScalarField, fb: FiberBundle) -> list[np.ndarray]:
    """Per-polyline arrays of sampled values, same lengths as the input
    polylines."""
    return [sample_trilinear(f, line) for line in fb.polylines]


class MeshProjector:
    """Repeated projection of fields on one fixed grid onto one fixed mesh.

    The grid does not move between runs (only the coil does), so the
    sampling geometry - corner indices, trilinear weights, bounds mask - is
    pose-independent and precomputed once. sample() then reduces to eight
    gathers and a weighted sum, and produces exactly what project_to_mesh
    would.
    """

    def __init__(self, grid: GridSpec, m: SurfaceMesh):
        self.grid = grid
        self.mesh = m
        nx, ny, nz = grid.dims
        dims = np.array([nx, ny, nz], dtype=np.float64)
        ijk = world_to_ijk(grid, m.vertices)
        self._inside = np.all((ijk >= 0.0) & (ijk <= dims - 1.0), axis=-1)

        clipped = np.clip(ijk, 0.0, dims - 1.0)
        lo = np.floor(clipped).astype(np.int64)
        lo = np.maximum(np.minimum(lo, (dims - 2).astype(np.int64)), 0)
        frac = clipped - lo
        if min(nx, ny, nz) == 1:
            frac[:, np.array([nx, ny, nz]) == 1] = 0.0
        i0, j0, k0 = lo[:, 0], lo[:, 1], lo[:, 2]
        i1 = np.minimum(i0 + 1, nx - 1)
        j1 = np.minimum(j0 + 1, ny - 1)
        k1 = np.minimum(k0 + 1, nz - 1)
        fi, fj, fk = frac[:, 0], frac[:, 1], frac[:, 2]
        wi0, wi1 = 1.0 - fi, fi
        wj0, wj1 = 1.0 - fj, fj
        wk0, wk1 = 1.0 - fk, fk
        # flat corner indices into the (nz, ny, nx) volume, x fastest
        def flat(k, j, i):
            return (k * ny + j) * nx + i
        self._corners = np.stack([
            flat(k0, j0, i0), flat(k0, j0, i1), flat(k0, j1, i0),
            flat(k0, j1, i1), flat(k1, j0, i0), flat(k1, j0, i1),
            flat(k1, j1, i0), flat(k1, j1, i1)], axis=0)
        self._weights = np.stack([
            wi0 * wj0 * wk0, wi1 * wj0 * wk0, wi0 * wj1 * wk0,
            wi1 * wj1 * wk0, wi0 * wj0 * wk1, wi1 * wj0 * wk1,
            wi0 * wj1 * wk1, wi1 * wj1 * wk1], axis=0)

    def sample(self, f: ScalarField) -> tuple[np.ndarray, ProjectionStats]:
        if not f.grid.same_lattice(self.grid):
            raise InvalidFieldData("field grid differs from the prepared grid")
        if self.mesh.n_vertices == 0:
            return np.zeros(0), ProjectionStats(0.0, 0.0, -1)
        flat = f.data.reshape(-1)
        out = np.zeros(self.mesh.n_vertices)
        for c in range(8):
            out += self._weights[c] * flat[self._corners[c]].astype(np.float64)
        out[~self._inside] = 0.0
        stats = ProjectionStats(vmin=float(out.min()), vmax=float(out.max()),
                                argmax=int(out.argmax()))
        return out, stats


# --- colormap ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ColorMap:
    """Piecewise-linear ramp over a value range.

    ``stops`` is an ordered list of (t, (r, g, b)) control points with t
    strictly increasing from 0 to 1; channel values are 0..255.
    """

    vmin: float
    vmax: float
    stops: tuple

    def __post_init__(self):
        if not (self.vmin < self.vmax):
            raise InvalidFieldData(f"colormap needs vmin < vmax, "
                                   f"got ({self.vmin}, {self.vmax})")
        stops = tuple((float(t), tuple(int(c) for c in rgb))
                      for t, rgb in self.stops)
        if len(stops) < 2 or stops[0][0] != 0.0 or stops[-1][0] != 1.0:
            raise InvalidFieldData("ramp must run from t=0 to t=1")
        ts = [t for t, _ in stops]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvalidFieldData("ramp t values must be strictly increasing")
        for _, rgb in stops:
            if len(rgb) != 3 or any(not (0 <= c <= 255) for c in rgb):
                raise InvalidFieldData(f"bad rgb triple {rgb}")
        object.__setattr__(self, "stops", stops)


def field_colormap(vmax: float, vmin: float = 0.0) -> ColorMap:
    """Default two-segment blue -> yellow -> red ramp.

    Pass an explicit fixed range when comparing coil positions; per-frame
    auto-ranging silently rescales between frames.
    """
    return ColorMap(vmin=vmin, vmax=vmax,
                    stops=((0.0, (0, 0, 255)),
                           (0.5, (255, 255, 0)),
                           (1.0, (255, 0, 0))))


def apply_colormap(values, cm: ColorMap) -> np.ndarray:
    """Map values to (n, 3) uint8 colors: clamp to range, normalize, and
    linearly interpolate the ramp. NaN maps to the first ramp color."""
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    nan = np.isnan(vals)
    t = (np.clip(vals, cm.vmin, cm.vmax) - cm.vmin) / (cm.vmax - cm.vmin)
    t[nan] = 0.0
    ts = np.array([s[0] for s in cm.stops])
    out = np.empty((len(t), 3), dtype=np.uint8)
    for ch in range(3):
        ramp = np.array([s[1][ch] for s in cm.stops], dtype=np.float64)
        out[:, ch] = np.rint(np.interp(t, ts, ramp)).astype(np.uint8)
    return out
