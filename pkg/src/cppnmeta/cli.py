"""Command-line front end: ``run``, ``eval``, ``export`` and ``verify``."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, archive as arc, cppn
from .config import RunConfig, bundled_config, load_config
from .errors import ConfigError, CppnMetaError, InfeasibleDesign
from .geometry import build_mesh, check_constraints, develop, get_group, make_cloud
from .geometry.export import render_svg, write_mesh_json, write_off
from .homogenization import BaseMaterial, homogenize

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_RUNTIME = 0, 1, 2, 3
APPEND_RETRIES = 3

log = logging.getLogger("cppnmeta")


def _setup_logging(level: str):
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_json_atomic(path: Path, data) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _resolve_config(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    try:
        return bundled_config(path)
    except ConfigError:
        raise ConfigError(f"config {path!r} not found (neither a file nor a bundled config)")


def _resolve_genome(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = Path(__file__).parent / "data" / "genomes" / (path if path.endswith(".json") else path + ".json")
    if bundled.exists():
        return bundled
    raise ConfigError(f"genome {path!r} not found")


@click.group()
@click.version_option(__version__, prog_name="cppnmeta")
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def main(log_level):
    """Evolve and analyse CPPN-encoded periodic metamaterial unit cells."""
    _setup_logging(log_level)


# ---------------------------------------------------------------- run


def _param_table(cfg: RunConfig, threads: int) -> str:
    rows = []
    for section, values in cfg.to_dict().items():
        for k, v in values.items():
            rows.append((f"{section}.{k}", json.dumps(v)))
    rows.append(("resolved.threads", str(threads)))
    rows.append(("resolved.run_id", cfg.run_id))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _record_for(ind, cfg: RunConfig, problem) -> arc.ArchiveRecord:
    ev = ind.evaluation
    extra = {"threshold": problem.threshold, "connectivity": problem.connectivity,
             "mesher": problem.mesher, "parents": list(ind.parents)}
    if ev.details:
        extra["details"] = ev.details
    return arc.ArchiveRecord(
        run_id=cfg.run_id, generation=ind.generation, id=ind.id, genome=problem.encode(ind.genome),
        symmetry=problem.symmetry, cv=float(ev.cv),
        fitness=list(ev.fitness) if ev.fitness is not None else None,
        tensor=ev.properties, resolution=problem.resolution, error=ev.error,
        objectives=[list(o) for o in problem.objectives], extra=extra,
    )


class _StorageAbort(RuntimeError):
    pass


@main.command()
@click.argument("config")
@click.option("--seed", type=int, default=None, help="Override run.seed.")
@click.option("--threads", type=int, default=None, help="Evaluation processes (default: all cores).")
@click.option("--output-dir", type=click.Path(file_okay=False), default=None, help="Override run.output_dir.")
@click.option("--generations", type=int, default=None, help="Override rvea.max_generations.")
@click.option("--force", is_flag=True, help="Overwrite an existing archive.")
@click.option("--dry-run", is_flag=True, help="Validate and print the resolved parameters only.")
def run(config, seed, threads, output_dir, generations, force, dry_run):
    """Run an evolution described by CONFIG (a file or a bundled config name)."""
    from .moea.loop import run as evolve

    try:
        cfg = load_config(_resolve_config(config))
        if seed is not None:
            cfg.run.seed = seed
        if output_dir is not None:
            cfg.run.output_dir = output_dir
        if generations is not None:
            if generations < 0:
                raise ConfigError("--generations must be non-negative")
            cfg.rvea.max_generations = generations
        if threads is not None:
            if threads < 1:
                raise ConfigError("--threads must be at least 1")
            cfg.run.threads = threads
        problem = cfg.build_problem()
        rvea = cfg.rvea_config()
    except CppnMetaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    n_threads = cfg.threads()

    if dry_run:
        click.echo(_param_table(cfg, n_threads))
        return

    out = Path(cfg.run.output_dir)
    archive_path = out / "archive.cma"
    if archive_path.exists() and not force:
        click.echo(f"error: {archive_path} exists; use --force to overwrite", err=True)
        sys.exit(EXIT_CONFIG)
    out.mkdir(parents=True, exist_ok=True)

    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "seed": cfg.run.seed,
        "run_id": cfg.run_id,
        "started": _now(),
        "archive": archive_path.name,
        "status": "running",
        "generations": [],
    }
    gen_log = open(out / "generations.csv", "w", newline="")
    gw = csv.writer(gen_log, lineterminator="\n")
    gw.writerow(["generation", "population", "evaluated", "feasible", "front_size",
                 *[f"best_{n}" for n, _ in problem.objectives], "mean_cv", "seconds"])
    writer = arc.ArchiveWriter(archive_path, overwrite=True)
    pending: list[arc.ArchiveRecord] = []

    def on_evaluated(ind):
        pending.append(_record_for(ind, cfg, problem))
        _drain()

    def _drain():
        while pending:
            for attempt in range(APPEND_RETRIES):
                try:
                    writer.append(pending[0])
                    break
                except OSError as exc:
                    log.warning("archive append failed (%s), retry %d", exc, attempt + 1)
                    time.sleep(0.1 * (attempt + 1))
            else:
                raise _StorageAbort(f"could not append record {pending[0].key}")
            pending.pop(0)

    def on_generation(s):
        row = s.as_dict()
        manifest["generations"].append(row)
        gw.writerow([s.generation, s.population, s.evaluated, s.feasible, s.front_size,
                     *[repr(b) for b in s.best], repr(s.mean_cv), f"{s.seconds:.3f}"])
        gen_log.flush()
        writer.flush()

    status, code = "completed", EXIT_OK
    try:
        result = evolve(rvea, problem, on_evaluated=on_evaluated, threads=n_threads,
                        on_generation=on_generation)
        manifest["evaluations"] = result.evaluations
    except _StorageAbort as exc:
        status, code = "aborted-storage", EXIT_RUNTIME
        click.echo(f"error: {exc}; archive is partial", err=True)
    except KeyboardInterrupt:
        status, code = "interrupted", EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - report and mark the archive partial
        status, code = "failed", EXIT_RUNTIME
        click.echo(f"error: run failed: {exc}", err=True)
    finally:
        try:
            writer.close()
        except OSError as exc:
            click.echo(f"error: closing archive failed: {exc}", err=True)
            status, code = "aborted-storage", EXIT_RUNTIME
        gen_log.close()
        manifest["status"] = status
        manifest["partial"] = status != "completed"
        manifest["records"] = writer.count
        manifest["finished"] = _now()
        write_json_atomic(out / "manifest.json", manifest)

    if code == EXIT_OK:
        records, _ = arc.read_archive(archive_path)
        (out / "front.csv").write_text(arc.front_csv(records))
        click.echo(f"wrote {writer.count} records to {archive_path}")
    sys.exit(code)


# ---------------------------------------------------------------- eval


def _fmt_matrix(m: np.ndarray) -> str:
    return "\n".join("  " + "  ".join(f"{v: .6e}" for v in row) for row in m)


@main.command("eval")
@click.argument("genome")
@click.option("--symmetry", default="p4mm", show_default=True)
@click.option("--resolution", type=int, default=35, show_default=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--mesher", type=click.Choice(["structured", "delaunay"]), default="structured", show_default=True)
@click.option("--youngs-modulus", type=float, default=1.0, show_default=True)
@click.option("--poisson-ratio", type=float, default=0.3, show_default=True)
@click.option("--render", type=click.Path(dir_okay=False), default=None, help="Write an SVG drawing.")
@click.option("--mesh-out", type=click.Path(dir_okay=False), default=None,
              help="Write the mesh as OFF plus a gzipped JSON twin (<name>.json.gz).")
@click.option("--json", "as_json", is_flag=True, help="Print a JSON summary instead of text.")
def eval_cmd(genome, symmetry, resolution, threshold, mesher, youngs_modulus, poisson_ratio,
             render, mesh_out, as_json):
    """Evaluate a single GENOME file (or bundled genome name)."""
    try:
        g = cppn.loads(_resolve_genome(genome).read_text())
        group = get_group(symmetry)
        cloud = make_cloud(group, resolution)
        material = BaseMaterial(youngs_modulus, poisson_ratio)
    except (CppnMetaError, KeyError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    summary: dict = {"symmetry": group.tag, "resolution": resolution}
    try:
        sampled = develop(g, group, cloud, threshold)
        report = check_constraints(sampled, cloud)
        summary["constraints"] = report.breakdown()
        summary["grid_volume_fraction"] = sampled.volume_fraction_estimate()
        mesh = build_mesh(sampled, cloud, mesher, group.rhombic)
        summary["volume_fraction"] = mesh.volume_fraction()
        if render:
            render_svg(mesh, render)
        if mesh_out:
            write_off(mesh, mesh_out)
            write_mesh_json(mesh, str(Path(mesh_out).with_suffix("")) + ".json.gz")
        tensor = homogenize(mesh, material)
    except InfeasibleDesign as exc:
        summary["error"] = f"{type(exc).__name__} at stage '{exc.stage}': {exc}"
        summary.setdefault("constraints", {"cv": float(resolution**2)})
        _print_eval(summary, None, as_json)
        sys.exit(EXIT_INFEASIBLE)
    except CppnMetaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)

    _print_eval(summary, tensor, as_json)
    sys.exit(EXIT_OK if report.feasible else EXIT_INFEASIBLE)


def _print_eval(summary: dict, tensor, as_json: bool):
    if tensor is not None:
        summary["C"] = tensor.c.tolist()
        summary["S"] = tensor.s.tolist() if tensor.invertible else None
        summary["E"] = tensor.e_avg
        summary["nu"] = tensor.nu_avg
    if as_json:
        click.echo(json.dumps(summary, indent=2, default=float))
        return
    click.echo(f"symmetry {summary['symmetry']}, resolution {summary['resolution']}")
    if "error" in summary:
        click.echo(f"infeasible design: {summary['error']}")
    cons = summary.get("constraints", {})
    click.echo("cv breakdown: " + ", ".join(f"{k}={v}" for k, v in cons.items()))
    if "volume_fraction" in summary:
        click.echo(f"volume fraction: {summary['volume_fraction']:.6f}")
    if tensor is not None:
        click.echo("C (Voigt, engineering shear):\n" + _fmt_matrix(tensor.c))
        if tensor.invertible:
            click.echo("S:\n" + _fmt_matrix(tensor.s))
            click.echo(f"E = {tensor.e_avg:.6g}\nnu = {tensor.nu_avg:.6g}")
        else:
            click.echo("S: singular stiffness (no stiffness in some direction); E, nu undefined")


# ---------------------------------------------------------------- export


@main.command()
@click.argument("archive_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["front", "families", "all"]), default="all", show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: next to the archive).")
@click.option("--run-id", default=None, help="Only export records of this run.")
@click.option("--delta-threshold", type=float, default=1.35, show_default=True)
@click.option("--coeffs", type=(float, float, float), default=(0.5, 0.5, 1.0), show_default=True)
@click.option("--feasible-only/--all-records", default=True, show_default=True,
              help="Cluster only feasible genomes.")
def export(archive_path, mode, out_dir, run_id, delta_threshold, coeffs, feasible_only):
    """Export fronts, tensors and genome families from an archive."""
    try:
        records, stats = arc.read_archive(archive_path)
    except (OSError, CppnMetaError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    if run_id is not None:
        records = [r for r in records if r.run_id == run_id]
    records.sort(key=lambda r: (r.run_id, r.generation, r.id))
    out = Path(out_dir) if out_dir else Path(archive_path).parent
    out.mkdir(parents=True, exist_ok=True)

    if mode in ("front", "all"):
        (out / "front.csv").write_text(arc.front_csv(records))
        (out / "tensors.csv").write_text(arc.tensor_csv(records))
    if mode in ("families", "all"):
        pool = [r for r in records if r.feasible] if feasible_only else records
        if pool:
            fams = arc.cluster_families([(k, r.load_genome()) for k, r in enumerate(pool)],
                                        coeffs, delta_threshold)
            members, summary = arc.family_tables(pool, fams)
            (out / "families.csv").write_text(members)
            (out / "family_summary.csv").write_text(summary)
            arc.write_family_bundle(pool, fams, out / "families.json.gz")
            click.echo(f"{len(fams)} families from {len(pool)} genomes")
    click.echo(f"exported {len(records)} records to {out}")
    if stats.skipped:
        click.echo(f"warning: skipped {stats.skipped} corrupt records", err=True)
    if stats.skipped_fraction > 0.01:
        sys.exit(EXIT_RUNTIME)


# ---------------------------------------------------------------- verify


@main.command()
@click.option("--full", is_flag=True, help="Full sample sizes plus the synthetic evolution check.")
def verify(full):
    """Run the built-in property and oracle checks."""
    from .verify import run_checks

    results = run_checks(full=full, echo=click.echo)
    failed = [r for r in results if not r.passed]
    click.echo(f"{len(results) - len(failed)}/{len(results)} checks passed")
    sys.exit(EXIT_OK if not failed else EXIT_RUNTIME)


if __name__ == "__main__":  # pragma: no cover
    main()
