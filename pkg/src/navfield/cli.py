"""Command-line front end: `navfield serve` runs the live loop, `navfield
bench run` reproduces the timing evaluation, `navfield assets ...` writes
the bundled synthetic inputs."""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click

from . import bench as bench_mod
from .engine import CoilParams
from .errors import NavfieldError
from .server import SessionConfig, config_from_json, config_to_json, serve


def _load_config(path: str | None, **overrides) -> SessionConfig:
    if path:
        cfg = config_from_json(Path(path).read_text())
    else:
        cfg = SessionConfig()
    fields = {k: v for k, v in overrides.items() if v is not None}
    if fields:
        from dataclasses import replace
        cfg = replace(cfg, **fields)
    return cfg


@click.group()
def main():
    """Real-time TMS field streaming back end."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON SessionConfig file.")
@click.option("--igtl-port", type=int, default=None,
              help="OpenIGTLink-compatible TCP port (default 18944).")
@click.option("--ws-port", type=int, default=None,
              help="WebSocket/HTTP port (default 8765).")
@click.option("--host", default=None, help="Bind address (default 127.0.0.1).")
@click.option("--backend", type=click.Choice(["analytic", "remote"]),
              default=None)
@click.option("--remote-endpoint", default=None, metavar="HOST:PORT",
              help="Field server to forward poses to (remote backend).")
@click.option("--mesh", "mesh_path", type=click.Path(exists=True), default=None,
              help="Brain mesh STL (default: bundled synthetic head).")
@click.option("--fibers", "fiber_path", type=click.Path(exists=True),
              default=None, help="Fiber bundle JSON.")
@click.option("--static-dir", type=click.Path(exists=True), default=None,
              help="Directory of UI assets to serve over HTTP.")
def serve_cmd(config_path, igtl_port, ws_port, host, backend, remote_endpoint,
              mesh_path, fiber_path, static_dir):
    """Start the streaming service and run until interrupted."""
    try:
        cfg = _load_config(config_path, igtl_port=igtl_port, ws_port=ws_port,
                           host=host, backend=backend,
                           remote_endpoint=remote_endpoint,
                           mesh_path=mesh_path, fiber_path=fiber_path,
                           static_dir=static_dir)
        svc = serve(cfg)
    except NavfieldError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"pose/field endpoint : tcp://{cfg.host}:{svc.igtl_port} "
               f"(TRANSFORM {cfg.pose_in!r} in, IMAGE {cfg.field_out!r} out)")
    click.echo(f"console endpoint    : ws://{cfg.host}:{svc.ws_port} "
               f"(http assets on the same port)")
    click.echo("Ctrl-C to stop.")
    try:
        while True:
            time.sleep(1.0)
    except KeyboardInterrupt:
        click.echo("draining...")
    finally:
        svc.stop()
        stats = svc.stats()
        if stats.n:
            click.echo(f"{stats.n} runs, predict "
                       f"{stats.compute_mean:.5f}±{stats.compute_std:.5f} s, "
                       f"vis {stats.vis_mean:.5f}±{stats.vis_std:.5f} s")


main.add_command(serve_cmd, name="serve")


@main.group()
def bench():
    """Latency benchmarks."""


@bench.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON SessionConfig file (defaults used otherwise).")
@click.option("--trajectory", default="handle:78", show_default=True,
              metavar="SCHEME", help="handle:N or random:SEED:N.")
@click.option("--runs", default=50, show_default=True)
@click.option("--warmup", default=5, show_default=True,
              help="Leading runs excluded from statistics.")
@click.option("--format", "fmt", type=click.Choice(["markdown", "csv"]),
              default="markdown", show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Report file; printed to stdout when omitted.")
@click.option("--json", "json_out", type=click.Path(), default=None,
              help="Also dump raw per-run timings as JSON.")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render PNG figures next to the report.")
@click.option("--label", default=None, help="Hardware/config row label.")
def bench_run(config_path, trajectory, runs, warmup, fmt, out, json_out,
              figures, label):
    """Time the full pose-to-visualization loop over a scripted trajectory.

    Exits nonzero if the report is incomplete.
    """
    try:
        cfg = _load_config(config_path)
        traj = bench_mod.make_trajectory(trajectory)
        report = bench_mod.run_bench(cfg, traj, runs=runs, warmup=warmup,
                                     label=label)
    except NavfieldError as exc:
        raise click.ClickException(str(exc))
    text = bench_mod.render_report(report, fmt)
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")
        if figures:
            outp = Path(out)
            paths = bench_mod.render_figures(report, outp.parent,
                                             stem=outp.stem)
            for p in paths:
                click.echo(f"wrote {p}")
    else:
        click.echo(text, nl=False)
    if json_out:
        Path(json_out).write_text(bench_mod.report_to_json(report))
        click.echo(f"wrote {json_out}")
    if not report.complete:
        click.echo("report incomplete", err=True)
        sys.exit(2)


@main.group()
def assets():
    """Write the bundled synthetic assets to disk."""


@assets.command("head")
@click.option("--out", type=click.Path(), required=True)
def assets_head(out):
    """Write the synthetic ~100k-vertex head mesh as binary STL."""
    from .assets import generate_head_mesh
    from .volio import save_mesh

    mesh = generate_head_mesh()
    save_mesh(out, mesh)
    click.echo(f"wrote {out} ({mesh.n_vertices} vertices, "
               f"{mesh.n_triangles} triangles)")


@assets.command("coil")
@click.option("--out", type=click.Path(), required=True)
@click.option("--wing-radius", default=35.0, show_default=True)
@click.option("--wing-separation", default=70.0, show_default=True)
def assets_coil(out, wing_radius, wing_separation):
    """Write the figure-8 display mesh as binary STL."""
    from .assets import generate_coil_mesh
    from .volio import save_mesh

    mesh = generate_coil_mesh(CoilParams(wing_radius=wing_radius,
                                         wing_separation=wing_separation))
    save_mesh(out, mesh)
    click.echo(f"wrote {out} ({mesh.n_vertices} vertices)")


@assets.command("config")
@click.option("--out", type=click.Path(), required=True)
def assets_config(out):
    """Write a default SessionConfig JSON to edit from."""
    Path(out).write_text(config_to_json(SessionConfig()))
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
