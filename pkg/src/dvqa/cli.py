"""Command-line interface: solve, bench, noise, gradcheck, brute.

Exit codes: 0 success, 1 runtime failure, 2 configuration error,
3 input parse error. Human-readable summaries go to stdout; machine
artifacts (CSV, JSON, tensor checkpoints) go to the output directory,
which is resolved from --out, then the DVQA_OUT environment variable,
then ./dvqa_out. Every run writes a manifest.json capturing the resolved
configuration, master seed, input digests, and tool version; result files
in the same directory belong to that manifest.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

import dvqa
from dvqa import analysis, ctensor, trainer
from dvqa.hamiltonian import Partition, load_hamiltonian, is_diagonal
from dvqa.problems import ParseError, load_graph, load_portfolio
from dvqa.problems import maxcut_hamiltonian, portfolio_hamiltonian, synth_graph

ITERATION_HEADER = ["iteration", "loss", "grad_theta_norm", "grad_c_norm", "c_norm"]
BENCH_HEADER = ["instance", "method", "run", "achieved", "opt", "ratio",
                "opt_is_proxy", "wall_time"]
NOISE_SUMMARY_HEADER = ["k", "runs", "mean", "std", "bound", "time"]
NOISE_RUNS_HEADER = ["k", "run", "e_sim", "delta", "wall_time"]
SCALING_SUMMARY_HEADER = ["size", "method", "runs", "median_ratio", "q1_ratio",
                          "q3_ratio", "median_time", "opt", "opt_is_proxy"]


def _guard(fn):
    """Map exceptions to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ParseError, FileNotFoundError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except click.ClickException:
            raise
        except Exception as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _positive(name):
    def check(ctx, param, value):
        if value is not None and value < 1:
            raise click.BadParameter(f"{name} must be >= 1")
        return value

    return check


def _outdir(out) -> Path:
    path = Path(out or os.environ.get("DVQA_OUT") or "dvqa_out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(outdir: Path, command: str, config: dict, seed: int,
                    inputs: dict[str, str]) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "master_seed": seed,
        "input_digests": inputs,
        "tool_version": dvqa.__version__,
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_problem(problem: str, input_path: str):
    if problem == "maxcut":
        return maxcut_hamiltonian(load_graph(input_path))
    if problem == "po":
        return portfolio_hamiltonian(load_portfolio(input_path))
    if problem == "ham":
        return load_hamiltonian(input_path)
    raise click.BadParameter(f"unknown problem {problem!r}")


def _parse_int_list(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        values = tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise click.BadParameter(f"expected a comma-separated integer list, got {text!r}")
    if not values:
        raise click.BadParameter("empty list")
    return values


@click.group()
@click.version_option(version=dvqa.__version__)
def main():
    """Distributed variational solver for Ising-encoded optimization problems."""


@main.command()
@click.option("--problem", type=click.Choice(["maxcut", "po", "ham"]), required=True)
@click.option("--input", "input_path", required=True, help="Instance file.")
@click.option("--k", default=2, callback=_positive("k"), help="Number of subsystems.")
@click.option("--sizes", default=None, help="Explicit subsystem sizes, e.g. '6,4'.")
@click.option("--rank", default=1, callback=_positive("rank"), help="Uniform rank.")
@click.option("--ranks", default=None, help="Per-subsystem ranks, e.g. '2,2,1'.")
@click.option("--depth", default=6, callback=_positive("depth"))
@click.option("--iters", default=200, callback=_positive("iters"))
@click.option("--lr", default=0.05, type=float)
@click.option("--mode", type=click.Choice(["exact", "shots", "noisy"]), default="exact")
@click.option("--shots", default=1000, callback=_positive("shots"))
@click.option("--p1", default=0.0, type=float)
@click.option("--p2", default=0.0, type=float)
@click.option("--seed", default=1, type=int)
@click.option("--restarts", default=1, callback=_positive("restarts"))
@click.option("--bond", default=2, callback=_positive("bond"))
@click.option("--samples", default=512, callback=_positive("samples"))
@click.option("--real-c", is_flag=True, default=False)
@click.option("--max-width", default=None, type=int, help="Hardware cap on subsystem width.")
@click.option("--out", default=None, help="Output directory.")
@click.option("--threads", default=1, callback=_positive("threads"))
@_guard
def solve(problem, input_path, k, sizes, rank, ranks, depth, iters, lr, mode,
          shots, p1, p2, seed, restarts, bond, samples, real_c, max_width,
          out, threads):
    """End-to-end pipeline: ingest, train, extract, report."""
    h = _load_problem(problem, input_path)
    sizes_t = _parse_int_list(sizes)
    ranks_t = _parse_int_list(ranks)
    try:
        if sizes_t is not None:
            part = Partition(sizes_t, ranks_t if ranks_t is not None else rank, max_width)
        else:
            part = Partition.even(h.num_qubits, k, ranks_t if ranks_t is not None else rank,
                                  max_width)
        config = trainer.TrainConfig(
            iterations=iters, learning_rate=lr, depth=depth, mode=mode,
            shots=shots, p1=p1, p2=p2, seed=seed, restarts=restarts,
            bond_dim=bond, extraction_samples=samples, real_c=real_c,
        )
    except ValueError as exc:
        raise click.BadParameter(str(exc))
    outdir = _outdir(out)
    flags = {
        "problem": problem, "input": str(input_path), "k": k, "sizes": sizes,
        "rank": rank, "ranks": ranks, "depth": depth, "iters": iters, "lr": lr,
        "mode": mode, "shots": shots, "p1": p1, "p2": p2, "restarts": restarts,
        "bond": bond, "samples": samples, "real_c": real_c,
        "max_width": max_width, "threads": threads,
    }
    manifest_path = _write_manifest(outdir, "solve", flags, seed,
                                    {str(input_path): _digest(input_path)})
    result = trainer.optimize(h, part, config)
    _write_csv(outdir / "iterations.csv", ITERATION_HEADER,
               [[it, f"{v:.17g}", f"{gt:.17g}", f"{gc:.17g}", f"{cn:.17g}"]
                for it, v, gt, gc, cn in result.records])
    ctensor.save_tensor(result.c_star, outdir / "c_star.txt")
    ratio = None
    if is_diagonal(h) and h.num_qubits <= analysis.MAX_BRUTE_QUBITS:
        _, opt = analysis.brute_force(h)
        if opt < 0 and result.best_energy < 0:
            ratio = analysis.approximation_ratio(opt, result.best_energy)
    document = {
        "manifest": str(manifest_path),
        "bitstring": result.best_bitstring,
        "energy": result.best_energy,
        "ratio": ratio,
        "loss_trace": [float(v) for v in result.loss_trace],
        "theta": [t.tolist() for t in result.theta_star],
        "c_star_file": str(outdir / "c_star.txt"),
        "restart_index": result.restart_index,
        "completed_iterations": result.completed_iterations,
        "wall_time": result.wall_time,
    }
    (outdir / "result.json").write_text(json.dumps(document, indent=2) + "\n")
    click.echo(f"bitstring: {result.best_bitstring}")
    click.echo(f"energy: {result.best_energy:.12g}")
    if ratio is not None:
        click.echo(f"ratio: {ratio:.6g}")
    click.echo(f"artifacts: {outdir}")


@main.command()
@click.option("--config", "config_path", required=True, help="key=value study file.")
@click.option("--out", default=None)
@click.option("--threads", default=None, type=int)
@click.option("--scaling", is_flag=True, default=False,
              help="Run the size-scaling protocol instead of file instances.")
@_guard
def bench(config_path, out, threads, scaling):
    """Benchmark protocol: repeated runs per instance and method."""
    kv = analysis.parse_kv_config(config_path)
    if threads is not None:
        kv["threads"] = str(threads)
    outdir = _outdir(out)
    if scaling or kv.get("protocol") == "scaling":
        config = analysis.ScalingStudyConfig.from_mapping(kv)
        _write_manifest(outdir, "bench-scaling", kv, config.seed,
                        {str(config_path): _digest(config_path)})
        records, summary = analysis.run_scaling_study(config)
        _write_csv(outdir / "bench.csv", BENCH_HEADER,
                   [[r.instance, r.method, r.run, f"{r.achieved:.17g}",
                     f"{r.opt:.17g}", f"{r.ratio:.17g}", int(r.opt_is_proxy),
                     f"{r.wall_time:.6f}"] for r in records])
        _write_csv(outdir / "scaling_summary.csv", SCALING_SUMMARY_HEADER,
                   [[s["size"], s["method"], s["runs"], f"{s['median_ratio']:.17g}",
                     f"{s['q1_ratio']:.17g}", f"{s['q3_ratio']:.17g}",
                     f"{s['median_time']:.6f}", f"{s['opt']:.17g}",
                     int(s["opt_is_proxy"])] for s in summary])
        for s in summary:
            if s["method"] == "dvqa":
                click.echo(f"n={s['size']}: median ratio {s['median_ratio']:.4f} "
                           f"(median time {s['median_time']:.2f}s)")
    else:
        config = analysis.BenchConfig.from_mapping(kv)
        _write_manifest(outdir, "bench", kv, config.seed,
                        {str(config_path): _digest(config_path)})
        records = analysis.run_benchmark(config)
        _write_csv(outdir / "bench.csv", BENCH_HEADER,
                   [[r.instance, r.method, r.run, f"{r.achieved:.17g}",
                     f"{r.opt:.17g}", f"{r.ratio:.17g}", int(r.opt_is_proxy),
                     f"{r.wall_time:.6f}"] for r in records])
        for r in records:
            click.echo(f"{r.instance} {r.method} run {r.run}: ratio {r.ratio:.4f}")
    click.echo(f"artifacts: {outdir}")


@main.command()
@click.option("--config", "config_path", required=True, help="key=value study file.")
@click.option("--out", default=None)
@click.option("--threads", default=None, type=int)
@_guard
def noise(config_path, out, threads):
    """Depolarizing-noise study across subsystem counts."""
    kv = analysis.parse_kv_config(config_path)
    if threads is not None:
        kv["threads"] = str(threads)
    config = analysis.NoiseStudyConfig.from_mapping(kv)
    outdir = _outdir(out)
    _write_manifest(outdir, "noise", kv, config.seed,
                    {str(config_path): _digest(config_path)})
    records, summary = analysis.run_noise_study(config)
    _write_csv(outdir / "noise_runs.csv", NOISE_RUNS_HEADER,
               [[r["k"], r["run"], f"{r['e_sim']:.17g}", f"{r['delta']:.17g}",
                 f"{r['wall_time']:.6f}"] for r in records])
    _write_csv(outdir / "noise_summary.csv", NOISE_SUMMARY_HEADER,
               [[s["k"], s["runs"], f"{s['mean']:.17g}", f"{s['std']:.17g}",
                 f"{s['bound']:.17g}", f"{s['time']:.6f}"] for s in summary])
    for s in summary:
        click.echo(f"K={s['k']}: mean dH {s['mean']:.4f} (std {s['std']:.4f}, "
                   f"bound {s['bound']:.4f})")
    click.echo(f"artifacts: {outdir}")


@main.command()
@click.option("--n", default=6, callback=_positive("n"))
@click.option("--k", default=2, callback=_positive("k"))
@click.option("--rank", default=2, callback=_positive("rank"))
@click.option("--depth", default=2, callback=_positive("depth"))
@click.option("--seed", default=1, type=int)
@click.option("--tolerance", default=1e-4, type=float)
@_guard
def gradcheck(n, k, rank, depth, seed, tolerance):
    """Compare analytic gradients against central finite differences."""
    graph = synth_graph(n, 0.6, seed)
    h = maxcut_hamiltonian(graph)
    part = Partition.even(n, k, min(rank, 2 ** (n // k)))
    theta = trainer.init_theta(part, depth, [seed, 0])
    c = ctensor.init_random(part.ranks, mode="dense", seed=[seed, 1])
    err = _max_gradient_error(h, part, theta, c)
    click.echo(f"max relative gradient error: {err:.3e}")
    if err > tolerance:
        click.echo(f"FAIL: exceeds {tolerance:.1e}", err=True)
        sys.exit(1)


def _max_gradient_error(h, part, theta, c) -> float:
    """Max relative deviation of analytic theta/C gradients from central FD."""
    step = 1e-5
    analytic_theta = trainer.grad_theta(h, part, theta, c)
    fd_theta = []
    for k_idx, vec in enumerate(theta):
        fd = np.zeros_like(vec)
        for t in range(vec.shape[0]):
            for sign in (1.0, -1.0):
                shifted = [v.copy() for v in theta]
                shifted[k_idx][t] += sign * step
                fd[t] += sign * trainer.loss(h, part, shifted, c)
        fd_theta.append(fd / (2 * step))
    num = max(
        float(np.max(np.abs(a - f))) if a.size else 0.0
        for a, f in zip(analytic_theta, fd_theta)
    )
    den = max(float(np.max(np.abs(np.concatenate(fd_theta)))), 1e-10)
    err_theta = num / den

    analytic_c = trainer.grad_c(h, part, theta, c)
    values = ctensor.to_dense(c).values
    flat = values.ravel()
    fd_c = np.zeros(flat.shape[0] * 2)
    for j in range(flat.shape[0]):
        for part_idx, delta in ((0, step), (1, 1j * step)):
            for sign in (1.0, -1.0):
                bumped = flat.copy()
                bumped[j] += sign * delta
                bumped_c = ctensor.renormalize(
                    ctensor.CorrelationTensor(part.ranks, values=bumped.reshape(values.shape))
                )
                fd_c[part_idx * flat.shape[0] + j] += sign * trainer.loss(
                    h, part, theta, bumped_c
                )
    fd_c /= 2 * step
    analytic_flat = np.concatenate([analytic_c.ravel().real, analytic_c.ravel().imag])
    err_c = float(np.max(np.abs(analytic_flat - fd_c))) / max(
        float(np.max(np.abs(fd_c))), 1e-10
    )
    return max(err_theta, err_c)


@main.command()
@click.option("--problem", type=click.Choice(["maxcut", "po", "ham"]), required=True)
@click.option("--input", "input_path", required=True)
@_guard
def brute(problem, input_path):
    """Exact optimum by exhaustive enumeration (diagonal instances)."""
    h = _load_problem(problem, input_path)
    bitstring, energy = analysis.brute_force(h)
    click.echo(f"bitstring: {bitstring}")
    click.echo(f"energy: {energy:.12g}")


if __name__ == "__main__":
    main()
