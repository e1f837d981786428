"""The live loop: coil poses stream in (OpenIGTLink TRANSFORM or WebSocket
JSON), the predictor runs, and field volumes plus mesh overlays stream back
out.

Concurrency contract: any number of network connections feed one depth-1
latest-wins pose mailbox; exactly one compute worker drains it; result
fan-out happens from the worker thread under per-connection send locks.
During continuous coil dragging stale poses are worthless, so a pending
pose is replaced by a newer one, but the pose being computed is never
aborted and the newest pose is always eventually computed.
"""

from __future__ import annotations

import itertools
import json
import logging
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import igtl
from .assets import generate_coil_mesh, generate_head_mesh
from .engine import AnalyticPredictor, CoilParams, Predictor
from .errors import (
    AssetLoadFailure,
    BindFailure,
    ConnectionLost,
    NavfieldError,
    ProtocolError,
    RemoteTimeout,
    SessionClosed,
)
from .geometry import (
    GridSpec,
    RigidPose,
    ScalarField,
    VectorField,
    pose_from_matrix,
)
from .projection import MeshProjector, field_colormap
from .volio import SurfaceMesh, load_mesh, write_stl

log = logging.getLogger("navfield.server")

DEFAULT_IGTL_PORT = 18944
DEFAULT_WS_PORT = 8765


def default_grid() -> GridSpec:
    """Reduced field-of-view box under the coil: 70x90x50 voxels at 0.7 mm,
    centered in x/y with voxel centers spanning z in [12, 46.3] mm."""
    return GridSpec(
        dims=(70, 90, 50),
        spacing=(0.7, 0.7, 0.7),
        origin=(-24.15, -31.15, 12.0),
        axes=np.eye(3),
    )


@dataclass(frozen=True)
class SessionConfig:
    backend: str = "analytic"            # "analytic" | "remote"
    grid: GridSpec = field(default_factory=default_grid)
    coil: CoilParams = field(default_factory=CoilParams)
    mesh_path: str | None = None         # None -> bundled synthetic head
    fiber_path: str | None = None
    host: str = "127.0.0.1"
    igtl_port: int = DEFAULT_IGTL_PORT
    ws_port: int = DEFAULT_WS_PORT
    pose_in: str = "CoilPose"
    field_out: str = "EField"
    colormap_range: tuple[float, float] | None = None  # None -> (0, frame max)
    stats_window: int = 50
    remote_endpoint: str | None = None
    remote_timeout_s: float = 10.0
    static_dir: str | None = None

    def __post_init__(self):
        if self.backend not in ("analytic", "remote"):
            raise NavfieldError(f"unknown backend {self.backend!r}")
        if self.igtl_port == self.ws_port and self.igtl_port != 0:
            raise NavfieldError("igtl_port and ws_port must be distinct")
        if self.backend == "remote" and not self.remote_endpoint:
            raise NavfieldError("remote backend needs remote_endpoint")


def config_to_json(cfg: SessionConfig) -> str:
    d = {
        "backend": cfg.backend,
        "grid": {
            "dims": list(cfg.grid.dims),
            "spacing": cfg.grid.spacing.tolist(),
            "origin": cfg.grid.origin.tolist(),
            "axes": cfg.grid.axes.tolist(),
        },
        "coil": {
            "wing_radius": cfg.coil.wing_radius,
            "wing_separation": cfg.coil.wing_separation,
            "turns": cfg.coil.turns,
            "dI_dt": cfg.coil.dI_dt,
            "segments_per_wing": cfg.coil.segments_per_wing,
        },
        "mesh_path": cfg.mesh_path,
        "fiber_path": cfg.fiber_path,
        "host": cfg.host,
        "igtl_port": cfg.igtl_port,
        "ws_port": cfg.ws_port,
        "pose_in": cfg.pose_in,
        "field_out": cfg.field_out,
        "colormap_range": list(cfg.colormap_range) if cfg.colormap_range else None,
        "stats_window": cfg.stats_window,
        "remote_endpoint": cfg.remote_endpoint,
        "remote_timeout_s": cfg.remote_timeout_s,
        "static_dir": cfg.static_dir,
    }
    return json.dumps(d, indent=2)


def config_from_json(text: str | bytes) -> SessionConfig:
    d = json.loads(text)
    kwargs = {}
    if "grid" in d:
        g = d["grid"]
        kwargs["grid"] = GridSpec(dims=tuple(g["dims"]), spacing=g["spacing"],
                                  origin=g["origin"], axes=g["axes"])
    if "coil" in d:
        kwargs["coil"] = CoilParams(**d["coil"])
    for key in ("backend", "mesh_path", "fiber_path", "host", "igtl_port",
                "ws_port", "pose_in", "field_out", "stats_window",
                "remote_endpoint", "remote_timeout_s", "static_dir"):
        if key in d:
            kwargs[key] = d[key]
    if d.get("colormap_range"):
        kwargs["colormap_range"] = tuple(d["colormap_range"])
    return SessionConfig(**kwargs)


# --- pose mailbox ----------------------------------------------------------------

class PoseMailbox:
    """Depth-1 latest-wins slot. put() replaces any pending pose; take()
    blocks until a pose or close arrives."""

    def __init__(self):
        self._cond = threading.Condition()
        self._item = None
        self._closed = False

    def put(self, item) -> None:
        with self._cond:
            if self._closed:
                raise SessionClosed("session is stopped")
            self._item = item
            self._cond.notify()

    def take(self, timeout: float | None = None):
        with self._cond:
            if not self._cond.wait_for(
                    lambda: self._item is not None or self._closed, timeout):
                return None
            item, self._item = self._item, None
            return item  # None only when closed and empty

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()


# --- timings ---------------------------------------------------------------------

@dataclass(frozen=True)
class RunTiming:
    """One run: a pose triggering the predictor, whose field is immediately
    prepared for visualization."""

    run_id: int
    pose: RigidPose
    compute_s: float
    vis_s: float
    started_at: float   # wall clock, seconds since epoch
    finished_at: float

    @property
    def total_s(self) -> float:
        return self.compute_s + self.vis_s


@dataclass(frozen=True)
class StageStats:
    n: int
    compute_mean: float
    compute_std: float
    vis_mean: float
    vis_std: float

    @property
    def total_mean(self) -> float:
        return self.compute_mean + self.vis_mean


def stage_stats(timings: list[RunTiming], last_n: int | None = None) -> StageStats:
    """Mean and population std per stage over the last ``last_n`` runs."""
    rows = timings[-last_n:] if last_n else list(timings)
    if not rows:
        return StageStats(0, 0.0, 0.0, 0.0, 0.0)
    comp = np.array([r.compute_s for r in rows])
    vis = np.array([r.vis_s for r in rows])
    return StageStats(
        n=len(rows),
        compute_mean=float(comp.mean()),
        compute_std=float(comp.std()),
        vis_mean=float(vis.mean()),
        vis_std=float(vis.std()),
    )


# --- session (transport-independent core) ------------------------------------------

class Session:
    """One predictor + one compute worker + fan-out listeners.

    Listeners receive already-encoded payloads so every subscriber shares
    one encoding pass. field listeners get framed IMAGE message bytes;
    overlay listeners get (meta dict, binary frame bytes).
    """

    def __init__(self, predictor: Predictor, *,
                 mesh: SurfaceMesh | None = None,
                 field_out: str = "EField",
                 colormap_range: tuple[float, float] | None = None,
                 stats_window: int = 50):
        self.predictor = predictor
        self.mesh = mesh
        self.field_out = field_out
        self.colormap_range = colormap_range
        self.stats_window = stats_window
        self._projector = (MeshProjector(predictor.grid, mesh)
                           if mesh is not None else None)
        self._mailbox = PoseMailbox()
        self._seq = itertools.count(1)
        self._run_ids = itertools.count(1)
        self._lock = threading.Lock()
        self._done = threading.Condition()
        self._timings: list[RunTiming] = []
        self._last_consumed = 0
        self._last_error: NavfieldError | None = None
        self._field_listeners: list = []
        self._overlay_listeners: list = []
        self._closed = False
        self._worker = threading.Thread(target=self._run_loop,
                                        name="navfield-compute", daemon=True)
        self._worker.start()

    # -- intake --

    def submit_pose(self, pose: RigidPose, source_tag: str = "api") -> int:
        """Queue a pose (latest wins). Returns a monotonically increasing
        submission number; the pose currently being computed is never
        aborted."""
        if self._closed:
            raise SessionClosed("session is stopped")
        seq = next(self._seq)
        self._mailbox.put((seq, pose, source_tag))
        return seq

    def submit_and_wait(self, pose: RigidPose, timeout: float = 60.0,
                        source_tag: str = "api") -> RunTiming:
        """Submit and block until that submission is resolved. Used by the
        benchmark driver, which must never let poses coalesce."""
        seq = self.submit_pose(pose, source_tag)
        with self._done:
            ok = self._done.wait_for(lambda: self._last_consumed >= seq, timeout)
        if not ok:
            raise RemoteTimeout(f"run for submission {seq} did not finish "
                                f"within {timeout}s")
        with self._lock:
            if self._timings and self._last_error is None:
                return self._timings[-1]
            err = self._last_error
        raise err if err is not None else SessionClosed("no run recorded")

    # -- fan-out --

    def add_field_listener(self, fn) -> None:
        with self._lock:
            self._field_listeners.append(fn)

    def remove_field_listener(self, fn) -> None:
        with self._lock:
            if fn in self._field_listeners:
                self._field_listeners.remove(fn)

    def add_overlay_listener(self, fn) -> None:
        with self._lock:
            self._overlay_listeners.append(fn)

    def remove_overlay_listener(self, fn) -> None:
        with self._lock:
            if fn in self._overlay_listeners:
                self._overlay_listeners.remove(fn)

    # -- introspection --

    def timings(self) -> list[RunTiming]:
        with self._lock:
            return list(self._timings)

    def stats(self, last_n: int | None = None) -> StageStats:
        return stage_stats(self.timings(),
                           self.stats_window if last_n is None else last_n)

    def scene_info(self) -> dict:
        grid = self.predictor.grid
        cmap = (field_colormap(self.colormap_range[1], self.colormap_range[0])
                if self.colormap_range else field_colormap(1.0))
        return {
            "type": "scene",
            "mesh_url": "/assets/brain.bin",
            "coil_url": "/assets/coil.bin",
            "stl_url": "/assets/brain.stl",
            "colormap": {
                "range": list(self.colormap_range) if self.colormap_range else None,
                "stops": [[t, list(rgb)] for t, rgb in cmap.stops],
            },
            "dims": list(grid.dims),
            "vertex_count": self.mesh.n_vertices if self.mesh else 0,
            "units": "V/m",
        }

    # -- shutdown --

    def stop(self, timeout: float = 10.0) -> None:
        """Close intake, drain the in-flight run, and join the worker."""
        self._closed = True
        self._mailbox.close()
        self._worker.join(timeout)

    # -- worker --

    def _run_loop(self):
        while True:
            item = self._mailbox.take()
            if item is None:
                return
            seq, pose, source_tag = item
            started = time.time()
            t0 = time.perf_counter()
            try:
                result = self.predictor.predict(pose)
            except NavfieldError as exc:
                log.warning("predict failed for %s pose: %s", source_tag, exc)
                self._resolve(seq, error=exc)
                continue
            compute_s = time.perf_counter() - t0

            t1 = time.perf_counter()
            image_msg = igtl.encode_message(
                igtl.TYPE_IMAGE, self.field_out, igtl.encode_image(result))
            overlay_meta = None
            overlay_frame = b""
            run_id = next(self._run_ids)
            if self._projector is not None:
                values, stats = self._projector.sample(result)
                vmax = (self.colormap_range[1] if self.colormap_range
                        else max(stats.vmax, 1e-30))
                vmin = self.colormap_range[0] if self.colormap_range else 0.0
                overlay_frame = (struct.pack("<I", run_id)
                                 + values.astype("<f4").tobytes())
                overlay_meta = {
                    "type": "field_meta",
                    "run_id": run_id,
                    "dims": list(result.grid.dims),
                    "range": [vmin, vmax],
                    "compute_s": compute_s,
                }
            vis_s = time.perf_counter() - t1
            if overlay_meta is not None:
                overlay_meta["vis_s"] = vis_s

            with self._lock:
                field_listeners = list(self._field_listeners)
                overlay_listeners = list(self._overlay_listeners)
            for fn in field_listeners:
                try:
                    fn(image_msg)
                except Exception as exc:  # a dead client must not kill the loop
                    log.debug("field listener dropped: %s", exc)
            if overlay_meta is not None:
                meta_json = json.dumps(overlay_meta)
                for fn in overlay_listeners:
                    try:
                        fn(meta_json, overlay_frame)
                    except Exception as exc:
                        log.debug("overlay listener dropped: %s", exc)

            timing = RunTiming(run_id=run_id, pose=pose, compute_s=compute_s,
                               vis_s=vis_s, started_at=started,
                               finished_at=time.time())
            self._resolve(seq, timing=timing)

    def _resolve(self, seq: int, timing: RunTiming | None = None,
                 error: NavfieldError | None = None):
        with self._lock:
            if timing is not None:
                self._timings.append(timing)
            self._last_error = error
        with self._done:
            self._last_consumed = seq
            self._done.notify_all()


# --- remote predictor ---------------------------------------------------------------

def _parse_endpoint(endpoint) -> tuple[str, int]:
    if isinstance(endpoint, tuple):
        return endpoint[0], int(endpoint[1])
    host, _, port = str(endpoint).rpartition(":")
    if not host:
        raise NavfieldError(f"endpoint {endpoint!r} is not host:port")
    return host, int(port)


class RemotePredictor:
    """Predictor that forwards poses over the wire protocol and waits for
    the next IMAGE: send TRANSFORM, block, decode.

    The recorded per-call duration includes network time, which is exactly
    what a remote-service deployment measures.
    """

    def __init__(self, endpoint, grid: GridSpec, timeout_s: float = 10.0,
                 pose_device: str = "CoilPose"):
        self.grid = grid
        self.timeout_s = timeout_s
        self.pose_device = pose_device
        self.last_compute_s = 0.0
        self._lock = threading.Lock()
        host, port = _parse_endpoint(endpoint)
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout_s)
        except OSError as exc:
            raise ConnectionLost(f"cannot reach {host}:{port}: {exc}") from exc
        self._sock.settimeout(timeout_s)
        self._file = self._sock.makefile("rwb")

    def predict(self, pose: RigidPose) -> ScalarField:
        with self._lock:
            t0 = time.perf_counter()
            try:
                igtl.write_transform(self._file, self.pose_device, pose)
                while True:
                    try:
                        msg = igtl.read_message(self._file)
                    except ProtocolError as exc:
                        log.warning("remote sent a bad frame (%s); waiting "
                                    "for the next", exc)
                        continue
                    if msg is None:
                        raise ConnectionLost("remote closed the stream")
                    if msg.header.type_name == igtl.TYPE_IMAGE:
                        break
            except socket.timeout as exc:
                raise RemoteTimeout(
                    f"no field within {self.timeout_s}s") from exc
            except OSError as exc:
                raise ConnectionLost(str(exc)) from exc
            self.last_compute_s = time.perf_counter() - t0
        content = msg.content
        if isinstance(content, VectorField):
            from .engine import magnitude
            content = magnitude(content)
        return content

    def close(self) -> None:
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass


def remote_predictor(endpoint, grid: GridSpec, timeout_s: float = 10.0,
                     pose_device: str = "CoilPose") -> RemotePredictor:
    return RemotePredictor(endpoint, grid, timeout_s, pose_device)


# --- OpenIGTLink TCP front end --------------------------------------------------------

class _IgtlFrontend:
    def __init__(self, session: Session, host: str, port: int, pose_in: str):
        self.session = session
        self.pose_in = pose_in
        try:
            self._server = socket.create_server((host, port))
        except OSError as exc:
            raise BindFailure(f"cannot bind igtl endpoint {host}:{port}: "
                              f"{exc}") from exc
        self.port = self._server.getsockname()[1]
        self._conns: dict[socket.socket, threading.Lock] = {}
        self._lock = threading.Lock()
        self._closing = False
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="navfield-igtl-accept", daemon=True)
        self._accept_thread.start()
        session.add_field_listener(self._broadcast)

    def _accept_loop(self):
        while True:
            try:
                conn, addr = self._server.accept()
            except OSError:
                return  # listener closed
            conn.settimeout(None)
            with self._lock:
                if self._closing:
                    conn.close()
                    return
                self._conns[conn] = threading.Lock()
            threading.Thread(target=self._reader_loop, args=(conn, addr),
                             name="navfield-igtl-reader", daemon=True).start()

    def _reader_loop(self, conn: socket.socket, addr):
        stream = conn.makefile("rb")
        log.info("igtl client connected from %s", addr)
        try:
            while True:
                try:
                    msg = igtl.read_message(stream)
                except (igtl.CrcMismatch, igtl.UnknownType) as exc:
                    log.warning("dropped frame from %s: %s", addr, exc)
                    continue
                except NavfieldError as exc:
                    log.warning("unrecoverable stream error from %s: %s",
                                addr, exc)
                    return
                except OSError:
                    return  # peer reset the connection
                if msg is None:
                    return
                if (msg.header.type_name == igtl.TYPE_TRANSFORM
                        and msg.header.device_name == self.pose_in):
                    try:
                        self.session.submit_pose(msg.content, source_tag="igtl")
                    except SessionClosed:
                        return
                else:
                    log.debug("ignoring %s %r from %s", msg.header.type_name,
                              msg.header.device_name, addr)
        finally:
            self._drop(conn)
            log.info("igtl client %s disconnected", addr)

    def _broadcast(self, payload: bytes):
        with self._lock:
            conns = list(self._conns.items())
        for conn, send_lock in conns:
            try:
                with send_lock:
                    conn.sendall(payload)
            except OSError:
                self._drop(conn)

    def _drop(self, conn: socket.socket):
        with self._lock:
            self._conns.pop(conn, None)
        try:
            conn.close()
        except OSError:
            pass

    def stop(self):
        with self._lock:
            self._closing = True
            conns = list(self._conns)
        self._server.close()
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._drop(conn)
        self._accept_thread.join(5.0)


# --- WebSocket + static HTTP front end ------------------------------------------------

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".stl": "application/octet-stream",
    ".map": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
}


class _WsFrontend:
    def __init__(self, session: Session, host: str, port: int,
                 assets: dict[str, bytes], static_dir: str | None):
        from websockets.http11 import Response
        from websockets.datastructures import Headers
        from websockets.sync.server import serve

        self.session = session
        self.assets = assets
        self.static_dir = Path(static_dir) if static_dir else None
        self._clients: dict = {}
        self._lock = threading.Lock()

        def process_request(connection, request):
            if request.headers.get("Upgrade", "").lower() == "websocket":
                return None
            path = request.path.split("?", 1)[0]
            body, ctype = self._lookup(path)
            if body is None:
                return Response(404, "Not Found", Headers(),
                                b"not found\n")
            headers = Headers()
            headers["Content-Type"] = ctype
            headers["Content-Length"] = str(len(body))
            return Response(200, "OK", headers, body)

        try:
            self._server = serve(self._handler, host, port,
                                 process_request=process_request,
                                 compression=None)
        except OSError as exc:
            raise BindFailure(f"cannot bind websocket endpoint {host}:{port}: "
                              f"{exc}") from exc
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="navfield-ws", daemon=True)
        self._thread.start()
        session.add_overlay_listener(self._broadcast)

    def _lookup(self, path: str):
        if path == "/":
            path = "/index.html"
        if path in self.assets:
            return self.assets[path], _CONTENT_TYPES.get(
                Path(path).suffix, "application/octet-stream")
        if self.static_dir is not None:
            target = (self.static_dir / path.lstrip("/")).resolve()
            root = self.static_dir.resolve()
            if target.is_relative_to(root) and target.is_file():
                return target.read_bytes(), _CONTENT_TYPES.get(
                    target.suffix, "application/octet-stream")
        return None, None

    def _handler(self, conn):
        send_lock = threading.Lock()
        conn.send(json.dumps(self.session.scene_info()))
        with self._lock:
            self._clients[conn] = send_lock
        try:
            for raw in conn:
                if not isinstance(raw, str):
                    continue
                self._handle_text(conn, send_lock, raw)
        except Exception:
            pass
        finally:
            with self._lock:
                self._clients.pop(conn, None)

    def _handle_text(self, conn, send_lock, raw: str):
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError:
            self._reply_error(conn, send_lock, "unparseable JSON")
            return
        if msg.get("type") == "pose":
            try:
                matrix = np.array(msg["matrix"], dtype=np.float64).reshape(4, 4)
                pose = pose_from_matrix(matrix)
            except (KeyError, ValueError, TypeError, NavfieldError) as exc:
                self._reply_error(conn, send_lock, f"bad pose: {exc}")
                return
            try:
                self.session.submit_pose(pose, source_tag="ws")
            except SessionClosed:
                pass
        elif msg.get("type") == "ping":
            with send_lock:
                conn.send(json.dumps({"type": "pong"}))

    def _reply_error(self, conn, send_lock, message: str):
        try:
            with send_lock:
                conn.send(json.dumps({"type": "error", "message": message}))
        except Exception:
            pass

    def _broadcast(self, meta_json: str, frame: bytes):
        with self._lock:
            clients = list(self._clients.items())
        for conn, send_lock in clients:
            try:
                with send_lock:
                    conn.send(meta_json)
                    conn.send(frame)
            except Exception:
                with self._lock:
                    self._clients.pop(conn, None)

    def stop(self):
        self._server.shutdown()
        self._thread.join(5.0)


def mesh_to_binary(mesh: SurfaceMesh) -> bytes:
    """Compact mesh transport for the console: the server's deduplicated
    vertex order travels verbatim, so per-vertex overlay scalars line up by
    construction.

    Layout (little-endian): magic "NVMESH01" | u32 n_vertices |
    u32 n_triangles | float32 positions (n*3) | uint32 indices (m*3).
    """
    head = b"NVMESH01" + struct.pack("<II", mesh.n_vertices, mesh.n_triangles)
    return (head
            + np.ascontiguousarray(mesh.vertices, dtype="<f4").tobytes()
            + np.ascontiguousarray(mesh.triangles, dtype="<u4").tobytes())


# --- assembling a service --------------------------------------------------------------

def load_assets(cfg: SessionConfig) -> tuple[SurfaceMesh, bytes | None]:
    """Resolve the brain mesh (synthetic head when no path is configured)
    and optional fiber JSON bytes."""
    if cfg.mesh_path is None:
        mesh = generate_head_mesh()
    else:
        try:
            mesh = load_mesh(cfg.mesh_path)
        except (OSError, NavfieldError) as exc:
            raise AssetLoadFailure(f"brain mesh {cfg.mesh_path!r}: {exc}") from exc
    fiber_bytes = None
    if cfg.fiber_path is not None:
        try:
            fiber_bytes = Path(cfg.fiber_path).read_bytes()
        except OSError as exc:
            raise AssetLoadFailure(f"fiber bundle {cfg.fiber_path!r}: "
                                   f"{exc}") from exc
    return mesh, fiber_bytes


def build_predictor(cfg: SessionConfig) -> Predictor:
    if cfg.backend == "remote":
        return remote_predictor(cfg.remote_endpoint, cfg.grid,
                                cfg.remote_timeout_s, cfg.pose_in)
    return AnalyticPredictor(params=cfg.coil, grid=cfg.grid)


class Service:
    """A running session plus its two network front ends."""

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        mesh, fiber_bytes = load_assets(cfg)
        self.predictor = build_predictor(cfg)
        self.session = Session(
            self.predictor,
            mesh=mesh,
            field_out=cfg.field_out,
            colormap_range=cfg.colormap_range,
            stats_window=cfg.stats_window,
        )
        coil_mesh = generate_coil_mesh(cfg.coil)
        assets = {
            "/assets/brain.stl": write_stl(mesh),
            "/assets/coil.stl": write_stl(coil_mesh),
            "/assets/brain.bin": mesh_to_binary(mesh),
            "/assets/coil.bin": mesh_to_binary(coil_mesh),
        }
        if fiber_bytes is not None:
            assets["/assets/fibers.json"] = fiber_bytes
        try:
            self._igtl = _IgtlFrontend(self.session, cfg.host, cfg.igtl_port,
                                       cfg.pose_in)
        except BindFailure:
            self.session.stop()
            raise
        try:
            self._ws = _WsFrontend(self.session, cfg.host, cfg.ws_port,
                                   assets, cfg.static_dir)
        except BindFailure:
            self._igtl.stop()
            self.session.stop()
            raise

    @property
    def igtl_port(self) -> int:
        return self._igtl.port

    @property
    def ws_port(self) -> int:
        return self._ws.port

    def submit_pose(self, pose: RigidPose, source_tag: str = "api") -> int:
        return self.session.submit_pose(pose, source_tag)

    def timings(self) -> list[RunTiming]:
        return self.session.timings()

    def stats(self, last_n: int | None = None) -> StageStats:
        return self.session.stats(last_n)

    def stop(self) -> None:
        """Graceful shutdown: stop intake, drain the in-flight run, close
        the sockets."""
        self.session.stop()
        self._igtl.stop()
        self._ws.stop()
        closer = getattr(self.predictor, "close", None)
        if closer is not None:
            closer()


def serve(cfg: SessionConfig) -> Service:
    """Start the live loop; returns the running service handle."""
    return Service(cfg)


def timings(handle: Service) -> list[RunTiming]:
    return handle.timings()


def stats(handle: Service, last_n: int | None = None) -> StageStats:
    return handle.stats(last_n)


def submit_pose(handle: Service, pose: RigidPose, source_tag: str = "api") -> int:
    return handle.submit_pose(pose, source_tag)
