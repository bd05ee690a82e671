"""Experiment harness: generate corpora, run refinement, fit and apply the
value model, run the cost-aware controller, and summarize results.

Exit codes: 0 success, 1 usage error, 2 input parse error, 3 runtime failure.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import io
import json
import math
import os
import statistics
import sys
import tempfile
from pathlib import Path
from typing import Optional

import click

from . import diagram as dg
from .diagram import DiagramError
from .generators import generate_corpus
from .inference import SolveCapExceeded, eval_policy, solve_optimal
from .metamodel import (
    CostModel,
    MetaModel,
    TrainingPoint,
    fit_polynomial,
    run_controller,
)
from .refinement import RefinementProfile, run_refinement


class InputParseError(Exception):
    """A problem, model or profile file failed to parse."""


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise InputParseError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise InputParseError(f"{path}: invalid JSON ({exc})")


def _load_diagram(path: Path) -> dg.InfluenceDiagram:
    try:
        d = dg.diagram_from_json(_load_json(path))
    except DiagramError as exc:
        raise InputParseError(f"{path}: {exc}")
    report = [m for m in dg.validate(d) if not m.startswith("warning:")]
    if report:
        raise InputParseError(f"{path}: invalid diagram: {report[0]}")
    return d


def _load_model(path: Path) -> MetaModel:
    try:
        return MetaModel.from_json(_load_json(path))
    except (DiagramError, KeyError, ValueError) as exc:
        raise InputParseError(f"{path}: invalid model file ({exc})")


def _config_default(config: Optional[dict], key: str, value, fallback):
    if value is not None:
        return value
    if config and key in config:
        return config[key]
    return fallback


def _read_config(path: Optional[str]) -> Optional[dict]:
    if path is None:
        return None
    return _load_json(Path(path))


@click.group()
def cli():
    """Anytime policy refinement for influence diagrams."""


# ---------------------------------------------------------------------------
# generate


@click.command()
@click.option("--config", "config_path", type=str, default=None, help="JSON config file.")
@click.option("--family", type=click.Choice(["1id", "maze"]), default=None)
@click.option("--count", type=int, default=None)
@click.option("--seed", type=int, default=None, help="Base seed for the corpus.")
@click.option("--n", "n_obs", type=int, default=None, help="1-ID: observation count.")
@click.option("--b", "b_param", type=float, default=None, help="1-ID: split retention probability.")
@click.option("--stages", type=int, default=None, help="Maze: stage count.")
@click.option("--grids", type=str, default=None, help="Maze: comma-separated grid names.")
@click.option("--out", "out_dir", type=str, required=True)
def generate(config_path, family, count, seed, n_obs, b_param, stages, grids, out_dir):
    """Write a seeded corpus of influence diagrams plus its manifest."""
    config = _read_config(config_path)
    family = _config_default(config, "family", family, "1id")
    count = _config_default(config, "count", count, 100)
    seed = _config_default(config, "seed", seed, 0)
    template = dict(_config_default(config, "template", None, {}))
    if n_obs is not None:
        template["n"] = n_obs
    if b_param is not None:
        template["b"] = b_param
    if stages is not None:
        template["stages"] = stages
    if grids is not None:
        template["grids"] = grids.split(",")
    diagrams, manifest = generate_corpus(family, count, seed, template)
    out = Path(out_dir)
    for d in diagrams:
        name = f"{d.meta['id']}.json"
        _atomic_write(out / name, dg.dumps(dg.diagram_to_json(d)))
        for inst in manifest["instances"]:
            if inst["seed"] == d.meta["seed"] and "path" not in inst:
                inst["path"] = name
                break
    _atomic_write(out / "manifest.json", dg.dumps(manifest))
    click.echo(f"wrote {len(diagrams)} diagrams to {out}")


# ---------------------------------------------------------------------------
# refine


def _refine_one(path: Path, budget: Optional[int], do_solve: bool, cap: int, out: Path) -> dict:
    d = _load_diagram(path)
    ev_star = None
    if do_solve:
        ev_star = solve_optimal(d, cap=cap).ev_star
    profile = run_refinement(d, max_steps=budget)
    problem_id = d.meta.get("id", path.stem)
    profile.ev_star = ev_star
    _atomic_write(out / f"{problem_id}.profile.csv", profile.to_csv())
    _atomic_write(
        out / f"{problem_id}.policy.json",
        dg.dumps(dg.policy_to_json(profile.final_policy)),
    )
    meta = {
        "id": problem_id,
        "seed": d.meta.get("seed"),
        "final_ev": profile.final_ev,
        "ev_star": ev_star,
        "stop_reason": profile.stop_reason,
        "steps": len(profile.steps) - 1,
    }
    _atomic_write(out / f"{problem_id}.meta.json", dg.dumps(meta))
    return meta


@click.command()
@click.argument("problems", nargs=-1, type=str)
@click.option("--config", "config_path", type=str, default=None)
@click.option("--budget", type=int, default=None, help="Refinement step budget.")
@click.option("--solve/--no-solve", "do_solve", default=False,
              help="Also compute the exact optimum and record it.")
@click.option("--cap", type=int, default=2 ** 20, help="Exact-solver size cap.")
@click.option("--jobs", type=int, default=1)
@click.option("--out", "out_dir", type=str, required=True)
def refine(problems, config_path, budget, do_solve, cap, jobs, out_dir):
    """Run information refinement on problem files; write profile + policy."""
    config = _read_config(config_path)
    budget = _config_default(config, "budget", budget, 30)
    if not problems:
        raise click.UsageError("no problem files given")
    paths = []
    for p in problems:
        path = Path(p)
        if path.is_dir():
            paths.extend(
                q for q in sorted(path.glob("*.json")) if q.name != "manifest.json"
            )
        else:
            paths.append(path)
    out = Path(out_dir)
    if jobs > 1 and len(paths) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_refine_one, p, budget, do_solve, cap, out) for p in paths
            ]
            metas = [f.result() for f in futures]
    else:
        metas = [_refine_one(p, budget, do_solve, cap, out) for p in paths]
    for m in metas:
        click.echo(
            f"{m['id']}: EV={m['final_ev']:.6f}"
            + (f" EV*={m['ev_star']:.6f}" if m["ev_star"] is not None else "")
            + f" ({m['stop_reason']}, {m['steps']} steps)"
        )


# ---------------------------------------------------------------------------
# solve


@click.command()
@click.argument("problem", type=str)
@click.option("--cap", type=int, default=2 ** 20)
@click.option("--out", "out_dir", type=str, default=None)
def solve(problem, cap, out_dir):
    """Compute the exact optimal expected value of a problem."""
    path = Path(problem)
    d = _load_diagram(path)
    result = solve_optimal(d, cap=cap)
    problem_id = d.meta.get("id", path.stem)
    click.echo(f"{problem_id}: EV* = {result.ev_star!r}")
    if out_dir is not None:
        _atomic_write(
            Path(out_dir) / f"{problem_id}.solution.json",
            dg.dumps({"id": problem_id, "ev_star": result.ev_star}),
        )


# ---------------------------------------------------------------------------
# fit


def _load_profiles(profiles_dir: Path) -> list[RefinementProfile]:
    metas = sorted(profiles_dir.glob("*.meta.json"))
    if not metas:
        raise InputParseError(f"no *.meta.json profiles in {profiles_dir}")
    out = []
    for mp in metas:
        meta = _load_json(mp)
        csv_path = profiles_dir / f"{meta['id']}.profile.csv"
        if not csv_path.exists():
            raise InputParseError(f"missing profile CSV for {meta['id']}: {csv_path}")
        try:
            profile = RefinementProfile.from_csv(
                csv_path.read_text(),
                diagram_id=meta["id"],
                seed=meta.get("seed"),
                ev_star=meta.get("ev_star"),
            )
        except DiagramError as exc:
            raise InputParseError(f"{csv_path}: {exc}")
        out.append(profile)
    return out


def _best_known(profiles: list[RefinementProfile]) -> dict[str, float]:
    best: dict[str, float] = {}
    for p in profiles:
        best[p.diagram_id] = max(best.get(p.diagram_id, -math.inf), p.final_ev)
    return best


@click.command()
@click.option("--profiles", "profiles_dir", type=str, required=True)
@click.option("--degree", type=int, default=1)
@click.option("--step", "extract_step", type=int, default=10,
              help="Profile step to extract the training point from.")
@click.option("--target", type=click.Choice(["ev-star", "best-known"]), default="ev-star",
              help="Training target: recorded optimum, or best value ever seen.")
@click.option("--out", "out_path", type=str, required=True)
def fit(profiles_dir, degree, extract_step, target, out_path):
    """Fit the polynomial value-prediction surface to a profile corpus."""
    profiles = _load_profiles(Path(profiles_dir))
    best = _best_known(profiles)
    points = []
    for p in profiles:
        if len(p.steps) <= extract_step:
            raise InputParseError(
                f"profile {p.diagram_id} too short for extraction step {extract_step}"
            )
        tgt = p.ev_star if target == "ev-star" else best[p.diagram_id]
        if tgt is None:
            raise InputParseError(
                f"profile {p.diagram_id} has no recorded optimum; "
                "rerun refine with --solve or use --target best-known"
            )
        rec = p.steps[extract_step]
        points.append(TrainingPoint(rec.ev_i, rec.h, tgt, p.diagram_id, extract_step))
    model = fit_polynomial(points, degree=degree)
    manifest = Path(profiles_dir) / "manifest.json"
    provenance = ""
    if manifest.exists():
        provenance = hashlib.sha256(manifest.read_bytes()).hexdigest()
    model = MetaModel(
        degree=model.degree,
        coefficients=model.coefficients,
        sse=model.sse,
        n_points=model.n_points,
        provenance=provenance,
    )
    _atomic_write(Path(out_path), dg.dumps(model.to_json()))
    coeffs = ", ".join(repr(c) for c in model.coefficients)
    click.echo(f"degree {degree}: coefficients [{coeffs}]")
    click.echo(f"SSE = {model.sse!r} over {model.n_points} points")


# ---------------------------------------------------------------------------
# predict


@click.command()
@click.option("--model", "model_path", type=str, required=True)
@click.option("--profiles", "profiles_dir", type=str, required=True)
@click.option("--clamp/--no-clamp", default=False)
@click.option("--out", "out_dir", type=str, required=True)
def predict(model_path, profiles_dir, clamp, out_dir):
    """Apply a fitted model to every step of every profile."""
    model = _load_model(Path(model_path))
    profiles = _load_profiles(Path(profiles_dir))
    out = Path(out_dir)
    for p in profiles:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "ev_i", "h", "ev_star_hat"])
        for s in p.steps:
            w.writerow(
                [s.step, repr(s.ev_i), repr(s.h),
                 repr(model.predict(s.ev_i, s.h, clamp=clamp))]
            )
        _atomic_write(out / f"{p.diagram_id}.pred.csv", buf.getvalue())
    click.echo(f"wrote predictions for {len(profiles)} profiles to {out}")


# ---------------------------------------------------------------------------
# control


@click.command()
@click.argument("problem", type=str)
@click.option("--model", "model_path", type=str, required=True)
@click.option("--cost", "cost_spec", type=str, default="zero",
              help="zero | linear:RATE | exp:A,R")
@click.option("--budget", type=int, default=30)
@click.option("--clamp/--no-clamp", default=False)
@click.option("--out", "out_dir", type=str, required=True)
def control(problem, model_path, cost_spec, budget, clamp, out_dir):
    """Run the cost-aware controller on one problem."""
    path = Path(problem)
    d = _load_diagram(path)
    model = _load_model(Path(model_path))
    try:
        cost = CostModel.parse(cost_spec)
    except (DiagramError, ValueError) as exc:
        raise click.UsageError(f"bad --cost: {exc}")
    trace = run_controller(d, model, cost, max_steps=budget, clamp=clamp)
    problem_id = d.meta.get("id", path.stem)
    out = Path(out_dir)
    _atomic_write(out / f"{problem_id}.trace.csv", trace.to_csv())
    summary = {"id": problem_id, **trace.summary()}
    _atomic_write(out / f"{problem_id}.control.json", dg.dumps(summary))
    click.echo(
        f"{problem_id}: stopped at step {trace.stop_step} ({trace.stop_reason}); "
        f"retrospective EV_II argmax at step {trace.argmax_ev_ii_step}"
    )


# ---------------------------------------------------------------------------
# report


def _trajectory_stats(pred_path: Path, final_ev: float, best: float) -> dict:
    rows = list(csv.DictReader(pred_path.open()))
    if not rows:
        raise InputParseError(f"{pred_path}: empty predictions")
    over_current = [float(r["ev_star_hat"]) - float(r["ev_i"]) for r in rows]
    over_best = [float(r["ev_star_hat"]) - best for r in rows]
    return {
        "final_estimate": float(rows[-1]["ev_star_hat"]),
        "mean_over_current": statistics.fmean(over_current),
        "std_over_current": statistics.pstdev(over_current),
        "mean_over_best_known": statistics.fmean(over_best),
        "std_over_best_known": statistics.pstdev(over_best),
    }


@click.command()
@click.option("--profiles", "profiles_dir", type=str, required=True)
@click.option("--predictions", "prediction_dirs", type=str, multiple=True,
              help="LABEL=DIR; repeat for several models.")
@click.option("--out", "out_path", type=str, default=None)
def report(profiles_dir, prediction_dirs, out_path):
    """Summarize profiles and model estimates per problem."""
    profiles = _load_profiles(Path(profiles_dir))
    best = _best_known(profiles)
    models: list[tuple[str, Path]] = []
    for spec in prediction_dirs:
        label, _, d = spec.partition("=")
        if not d:
            raise click.UsageError(f"--predictions must be LABEL=DIR, got {spec!r}")
        models.append((label, Path(d)))

    per_problem = []
    for p in sorted(profiles, key=lambda q: q.diagram_id):
        row = {
            "id": p.diagram_id,
            "final_ev": p.final_ev,
            "best_known": best[p.diagram_id],
            "ev_star": p.ev_star,
            "models": {},
        }
        for label, d in models:
            pred_path = d / f"{p.diagram_id}.pred.csv"
            if not pred_path.exists():
                raise InputParseError(f"missing predictions for {p.diagram_id}: {pred_path}")
            row["models"][label] = _trajectory_stats(pred_path, p.final_ev, best[p.diagram_id])
        per_problem.append(row)

    aggregate = {}
    for label, _ in models:
        over_cur = [r["models"][label]["mean_over_current"] for r in per_problem]
        over_best = [r["models"][label]["mean_over_best_known"] for r in per_problem]
        aggregate[label] = {
            "mean_over_current": statistics.fmean(over_cur) if over_cur else 0.0,
            "std_over_current": statistics.pstdev(over_cur) if over_cur else 0.0,
            "mean_over_best_known": statistics.fmean(over_best) if over_best else 0.0,
            "std_over_best_known": statistics.pstdev(over_best) if over_best else 0.0,
        }
    doc = {"problems": per_problem, "aggregate": aggregate}
    if out_path is not None:
        _atomic_write(Path(out_path), dg.dumps(doc))

    headers = ["problem"] + [label for label, _ in models] + ["best known"]
    click.echo("  ".join(f"{h:>14}" for h in headers))
    for r in per_problem:
        cells = [r["id"][:14].rjust(14)]
        for label, _ in models:
            cells.append(f"{r['models'][label]['final_estimate']:14.4f}")
        cells.append(f"{r['best_known']:14.4f}")
        click.echo("  ".join(cells))


cli.add_command(generate)
cli.add_command(refine)
cli.add_command(solve)
cli.add_command(fit)
cli.add_command(predict)
cli.add_command(control)
cli.add_command(report)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return 1
    except InputParseError as exc:
        click.echo(f"parse error: {exc}", err=True)
        return 2
    except SolveCapExceeded as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except DiagramError as exc:
        click.echo(f"parse error: {exc}", err=True)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        click.echo(f"error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
