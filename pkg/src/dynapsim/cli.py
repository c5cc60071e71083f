"""Command-line client for the simulation service.

Every subcommand builds a request and sends it over HTTP. By default the
service app runs in-process (no server needed); pass ``--server URL`` to
talk to a running instance instead, or start one with ``dynapsim serve``.

Exit codes: 0 success, 2 usage, 3 parse/config errors, 4 infeasible
resources, 5 simulation faults.

``DYNAPSIM_LOG`` sets the log level (debug, info, warning, error).
"""

from __future__ import annotations

import json
import logging
import os
import sys
import warnings

import click
import httpx
import yaml

EXIT_CODES = {
    "usage": 2,
    "parse": 3,
    "config": 3,
    "domain": 3,
    "range": 3,
    "resource": 4,
    "simulation": 5,
    "internal": 5,
}


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _post(server: str | None, endpoint: str, payload: dict) -> dict:
    with _client(server) as client:
        response = client.post(endpoint, json=payload)
    if response.status_code == 200:
        return response.json()
    try:
        detail = response.json().get("detail", {})
    except ValueError:
        detail = {}
    if isinstance(detail, dict) and "category" in detail:
        category = detail["category"]
        message = detail.get("message", "")
    elif isinstance(detail, list):  # pydantic validation errors
        category = "usage"
        message = "; ".join(str(d.get("msg", d)) for d in detail)
    else:
        category = "internal"
        message = response.text
    click.echo(f"error ({category}): {message}", err=True)
    sys.exit(EXIT_CODES.get(category, 5))


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL; default runs the service in-process.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Neuromorphic fabric toolkit: analyze, compile, simulate."""
    level = os.environ.get("DYNAPSIM_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    ctx.obj = {"server": server}


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8437, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


@main.command("analyze-memory")
@click.option("--grid", "grid_path", type=click.Path(exists=True),
              help="YAML file with n/f/c/alpha lists (cross product).")
@click.option("--n", type=float, help="Single-point neuron count.")
@click.option("--f", type=float, help="Single-point fan-out.")
@click.option("--c", type=float, help="Single-point cluster size.")
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--hardware-bits", is_flag=True,
              help="Apply ceilings to field widths.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for memory_report.tsv.")
@click.pass_context
def analyze_memory(ctx, grid_path, n, f, c, alpha, hardware_bits, out_dir):
    """Evaluate the two-stage routing memory model over a parameter grid."""
    payload: dict = {"hardware_bits": hardware_bits, "out_dir": out_dir}
    if grid_path:
        with open(grid_path) as fp:
            grid = yaml.safe_load(fp)
        if not isinstance(grid, dict):
            click.echo("error (parse): grid file must be a mapping", err=True)
            sys.exit(3)
        payload["grid"] = {
            "n": grid.get("n", []),
            "f": grid.get("f", []),
            "c": grid.get("c", []),
            "alpha": grid.get("alpha", [1.0]),
        }
    elif n and f and c:
        payload["points"] = [{"n": n, "f": f, "c": c, "alpha": alpha}]
    else:
        click.echo("error (usage): give --grid or all of --n --f --c", err=True)
        sys.exit(2)
    data = _post(ctx.obj["server"], "/analyze-memory", payload)
    click.echo(data["tsv"], nl=False)
    for name, path in data["artifacts"].items():
        click.echo(f"wrote {name}: {path}", err=True)


@main.command()
@click.option("--netlist", "netlist_path", type=click.Path(exists=True),
              required=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for image.mem and placement.tsv.")
@click.pass_context
def compile(ctx, netlist_path, config_path, seed, out_dir):
    """Map a netlist onto the fabric and emit its memory image."""
    data = _post(ctx.obj["server"], "/compile", {
        "netlist_path": os.path.abspath(netlist_path),
        "config_path": os.path.abspath(config_path) if config_path else None,
        "seed": seed,
        "out_dir": os.path.abspath(out_dir) if out_dir else None,
    })
    v = data["validation"]
    click.echo(f"network {data['network']}: {data['n_neurons']} neurons "
               f"(+{data['n_external']} external), {data['n_edges']} edges")
    click.echo(f"placed on {data['n_cores']} cores across "
               f"{data['n_chips']} chips; {data['sram_words']} SRAM words, "
               f"{data['cam_words']} CAM words")
    click.echo(f"validation: {'OK' if v['ok'] else 'FAILED'} "
               f"(missing {v['missing_edges']}, spurious "
               f"{v['spurious_edges']}); {v['bits_used_avg']:.1f} bits/neuron "
               f"used of {v['bits_provisioned']} provisioned "
               f"(model predicts {v['eq2_prediction_bits']:.1f})")
    for name, path in data["artifacts"].items():
        click.echo(f"wrote {name}: {path}", err=True)
    if not v["ok"]:
        sys.exit(4)


def _run_simulation(ctx, config_path, image_path, stimulus_path, until_ms,
                    seed, throttle_io, trace, out_dir):
    data = _post(ctx.obj["server"], "/simulate", {
        "config_path": os.path.abspath(config_path) if config_path else None,
        "image_path": os.path.abspath(image_path) if image_path else None,
        "stimulus_path": (os.path.abspath(stimulus_path)
                          if stimulus_path else None),
        "until_ms": until_ms,
        "seed": seed,
        "throttle_io": throttle_io or None,
        "trace": trace,
        "out_dir": os.path.abspath(out_dir) if out_dir else None,
    })
    counters = data["counters"]
    shown = ("events_injected", "spikes", "packets_spawned", "broadcasts",
             "delivered", "faulted", "r3_hops", "pulses")
    click.echo(f"simulated to {data['t_ns'] / 1e6:.3f} ms; "
               f"energy {data['energy_pj']:.1f} pJ")
    for name in shown:
        click.echo(f"  {name}: {counters[name]}")
    for name, path in data["artifacts"].items():
        click.echo(f"wrote {name}: {path}", err=True)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--image", "image_path", type=click.Path(exists=True),
              default=None, help="Memory image to program before running.")
@click.option("--stimulus", "stimulus_path", type=click.Path(exists=True),
              default=None, help="Stimulus TSV (time_ns chip core tag).")
@click.option("--until-ms", type=float, default=10.0, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--throttle-io", is_flag=True,
              help="Serialize input at the interface rate.")
@click.option("--trace", is_flag=True, help="Also write a per-packet trace.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def simulate(ctx, config_path, image_path, stimulus_path, until_ms, seed,
             throttle_io, trace, out_dir):
    """Run a programmed fabric against a stimulus file."""
    _run_simulation(ctx, config_path, image_path, stimulus_path, until_ms,
                    seed, throttle_io, trace, out_dir)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--image", "image_path", type=click.Path(exists=True),
              default=None)
@click.option("--stimulus", "stimulus_path", type=click.Path(exists=True),
              default=None)
@click.option("--until-ms", type=float, default=10.0, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--throttle-io", is_flag=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def trace(ctx, config_path, image_path, stimulus_path, until_ms, seed,
          throttle_io, out_dir):
    """Simulate with a per-packet trace log (time seq event location)."""
    _run_simulation(ctx, config_path, image_path, stimulus_path, until_ms,
                    seed, throttle_io, True, out_dir)


@main.command("demo-cnn")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--presentations-per-class", type=int, default=10,
              show_default=True)
@click.option("--trace", is_flag=True)
@click.pass_context
def demo_cnn(ctx, out_dir, seed, presentations_per_class, trace):
    """Train and classify the synthetic four-symbol event streams."""
    data = _post(ctx.obj["server"], "/demo-cnn", {
        "out_dir": os.path.abspath(out_dir),
        "seed": seed,
        "n_test_per_class": presentations_per_class,
        "trace": trace,
    })
    click.echo(f"accuracy: {data['n_correct']}/{data['n_total']} "
               f"({100 * data['accuracy']:.1f}%)")
    if data["max_first_decision_ms"] is not None:
        click.echo("slowest first correct decision: "
                   f"{data['max_first_decision_ms']:.1f} ms after onset")
    click.echo(f"energy: {data['energy_pj']:.3e} pJ over "
               f"{data['sim_time_ms']:.0f} ms simulated")
    click.echo(json.dumps({"labels": data["labels"],
                           "truths": data["truths"]}))
    for name, path in data["artifacts"].items():
        click.echo(f"wrote {name}: {path}", err=True)


if __name__ == "__main__":
    main()
