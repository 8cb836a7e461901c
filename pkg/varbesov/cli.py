#!/usr/bin/env python3
"""
varbesov CLI - corpora, weights, mollifiers, norms, class checks and experiments.

Exit codes: 0 on success or PASS, 2 when an experiment refuses to run because
a hypothesis fails, 1 on any other error, on usage errors and on FAIL.
"""

import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import __version__
from .analysis.convolution import build_mollifier, save_mollifier
from .analysis.sequences import PositiveSequence, hardy_condition, hardy_stability
from .analysis.trace import trace_experiment
from .analysis.weights import (
    WeightSequence,
    check_ap_loc,
    check_class_loc_Y,
    check_class_X,
    check_class_X_bar,
    check_class_Y,
    load_weights,
    make_weights,
    save_weights,
    weights_from_generator,
)
from .config import (
    CORPUS_FAMILIES,
    WEIGHT_KINDS,
    CorpusConfig,
    MollifierConfig,
    NormParams,
    NormSpec,
    load_config,
)
from .core.error_handling import ConfigError, HypothesisError, VarBesovError
from .core.grid import GridFunction
from .core.models import Direction
from .experiments.corpus import generate_corpus, save_corpus
from .experiments.harness import (
    REPORT_HEADER,
    MollifierCache,
    embedding_run,
    equivalence_run,
    evaluate_norm,
    normal_power_weight,
    trace_run,
    weights_at,
    write_report,
)
from .utils import format_float, write_csv

console = Console(stderr=True)

NORM_KINDS = ("conv", "diff", "spline", "fourier", "avgdiff")
CHECK_KINDS = ("class-x", "class-y", "class-loc-y", "hardy", "ap-loc")


def setup_logging(verbose: bool) -> None:
    root = logging.getLogger("varbesov")
    root.handlers.clear()
    root.addHandler(RichHandler(console=console, show_path=False))
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def shown(value: float) -> str:
    """Display form of a computed value (12 decimals)."""
    return format_float(round(value, 12) if math.isfinite(value) else value)


def exponent_option(name: str, default: float, help_text: str):
    return click.option(name, type=float, default=default, show_default=True, help=help_text)


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Log per-level timings and diagnostics")
@click.pass_context
def cli(ctx, verbose):
    """varbesov - Besov quasi-norms of variable smoothness on dyadic grids."""
    setup_logging(verbose)
    ctx.ensure_object(dict)


# gen


@cli.group()
def gen():
    """Generate corpora, weight sequences and mollifiers."""


@gen.command("corpus")
@click.option("--config", "config_path", type=click.Path(exists=True), help="Experiment config")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dim", type=int, default=1, show_default=True)
@click.option("--count", type=int, default=10, show_default=True)
@click.option("--family", "families", multiple=True, type=click.Choice(CORPUS_FAMILIES),
              help="Corpus family (repeatable, default bumps)")
@click.option("--level", type=int, default=10, show_default=True, help="Grid level J")
@click.option("--box-radius", type=float, default=2.0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Output directory")
def gen_corpus(config_path, seed, dim, count, families, level, box_radius, out):
    """Write a deterministic corpus as CSV files plus corpus.json."""
    if config_path:
        config = load_config(config_path).corpus
    else:
        config = CorpusConfig(seed=seed, dim=dim, count=count,
                              families=list(families) or ["bumps"], level=level,
                              box_radius=box_radius)
    corpus = generate_corpus(config)
    manifest = save_corpus(corpus, out)
    console.print(f"✅ {len(corpus)} functions written to {manifest}", style="bold green")
    return 0


@gen.command("weights")
@click.option("--kind", type=click.Choice(WEIGHT_KINDS), default="two_ks", show_default=True)
@click.option("--s", type=float, default=0.0, show_default=True, help="Smoothness exponent")
@click.option("--beta", type=float, default=0.0, show_default=True, help="Power exponent")
@click.option("--center", type=float, default=0.0, show_default=True)
@exponent_option("--p", 2.0, "Integrability exponent p")
@click.option("--dim", type=int, default=1, show_default=True)
@click.option("--level", type=int, default=10, show_default=True, help="Grid level J")
@click.option("--box-radius", type=float, default=2.0, show_default=True)
@click.option("--levels", "K", type=int, default=4, show_default=True, help="Level cap K")
@click.option("--embed", is_flag=True, help="Write level CSVs instead of the generator")
@click.option("--out", type=click.Path(), required=True, help="Manifest path (.json)")
def gen_weights(kind, s, beta, center, p, dim, level, box_radius, K, embed, out):
    """Write a weight manifest."""
    t = make_weights(kind, s=s, beta=beta, center=center, p=p, dim=dim, level=level,
                     box_radius=box_radius, K=K)
    path = save_weights(t, out, embed_levels=embed)
    console.print(f"✅ weights written to {path}", style="bold green")
    return 0


@gen.command("mollifier")
@click.option("--dim", type=int, default=1, show_default=True)
@click.option("--M", "M", type=int, default=2, show_default=True, help="Vanishing moment order")
@click.option("--support-radius", type=float, default=0.5, show_default=True)
@click.option("--level", type=int, default=10, show_default=True, help="Grid level J")
@click.option("--out", type=click.Path(), required=True, help="Kernel CSV path")
def gen_mollifier(dim, M, support_radius, level, out):
    """Write phi0 as CSV with a JSON sidecar; prints L_phi."""
    mol = build_mollifier(dim, M, support_radius, level)
    save_mollifier(mol, out)
    click.echo(f"L_phi={mol.L_phi} condition={mol.condition_number:.6g}")
    return 0


# norm


def _weights_for(weights_path: Optional[str], f: GridFunction, p: float,
                 K: int) -> WeightSequence:
    if weights_path:
        return weights_at(load_weights(weights_path), f)
    return make_weights("two_ks", p=p, dim=f.dim, level=f.level, box_radius=f.box_radius, K=K)


@cli.command()
@click.argument("kind", type=click.Choice(NORM_KINDS))
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="Function CSV")
@exponent_option("--p", 2.0, "Integrability exponent p")
@exponent_option("--q", 2.0, "Summation exponent q")
@exponent_option("--r", 1.0, "Local averaging exponent r")
@click.option("--l", "l", type=int, default=2, show_default=True, help="Difference/spline order")
@click.option("--levels", "K", type=int, default=4, show_default=True, help="Level cap K")
@click.option("--weights", "weights_path", type=click.Path(exists=True),
              help="Weight manifest (default t_k = 1)")
@click.option("--M", "M", type=int, default=2, show_default=True, help="Mollifier moments")
@click.option("--support-radius", type=float, default=0.5, show_default=True)
@click.option("--h-nodes", type=int, default=None, help="Cap on h samples per half-width")
@click.option("--compact-support", is_flag=True,
              help="Input vanishes on the box boundary; drop stencils leaving the box")
@click.option("--out", type=click.Path(), help="Output CSV")
def norm(kind, input_path, p, q, r, l, K, weights_path, M, support_radius, h_nodes,
         compact_support, out):
    """Evaluate one quasi-norm of a function."""
    f = GridFunction.from_csv(input_path)
    params = NormParams(p=p, q=q, r=r, l=l, K=K, h_nodes=h_nodes,
                        compact_support=compact_support)
    t = _weights_for(weights_path, f, p, K)
    spec = NormSpec(kind=kind, mollifier=MollifierConfig(M=M, support_radius=support_radius)
                    if kind == "conv" else None)
    mol = None
    if kind == "conv":
        mol = MollifierCache(MollifierConfig()).get(spec, f.dim, f.level)
    value = evaluate_norm(spec, f, t, params, mol)
    function_id = Path(input_path).stem
    if out:
        write_csv(out, REPORT_HEADER,
                  [(function_id, kind, value.value, K, f.level, value.tail_fraction)])
    click.echo(shown(value.value))
    return 0


# check


def _report_table(title: str, report) -> None:
    table = Table(title=title)
    table.add_column("field")
    table.add_column("value")
    for key in ("member", "C1", "C2", "C_alpha3", "stable"):
        table.add_row(key, str(getattr(report, key)))
    for note in report.notes:
        table.add_row("note", note)
    console.print(table)


@cli.command()
@click.argument("kind", type=click.Choice(CHECK_KINDS))
@click.option("--weights", "weights_path", type=click.Path(exists=True),
              help="Weight manifest (class checks)")
@click.option("--k-max", type=int, default=None, help="Highest level checked")
@click.option("--bar", is_flag=True, help="Check class X in barred form")
@click.option("--terms", help="Comma-separated sequence terms (hardy)")
@click.option("--ratio", type=float, default=None, help="Geometric sequence ratio (hardy)")
@click.option("--start", type=float, default=1.0, show_default=True)
@exponent_option("--s", 1.0, "Hardy exponent s")
@click.option("--direction", type=click.Choice(["tail", "head"]), default="tail",
              show_default=True)
@click.option("--n-max", type=int, default=128, show_default=True)
@click.option("--input", "input_path", type=click.Path(exists=True), help="Weight CSV (ap-loc)")
@exponent_option("--u", 2.0, "Muckenhoupt exponent (ap-loc)")
@click.option("--side-cap", type=float, default=1.0, show_default=True)
def check(kind, weights_path, k_max, bar, terms, ratio, start, s, direction, n_max,
          input_path, u, side_cap):
    """Weight-class, Hardy and local Muckenhoupt checks."""
    if kind == "hardy":
        return _check_hardy(terms, ratio, start, s, direction, n_max)
    if kind == "ap-loc":
        if not input_path:
            raise click.UsageError("ap-loc needs --input")
        click.echo(shown(check_ap_loc(GridFunction.from_csv(input_path), u, side_cap)))
        return 0
    if not weights_path:
        raise click.UsageError(f"{kind} needs --weights")
    t = load_weights(weights_path)
    if kind == "class-x":
        report = check_class_X_bar(t, k_max) if bar else check_class_X(t, k_max)
    elif kind == "class-y":
        report = check_class_Y(t, k_max)
    else:
        report = check_class_loc_Y(t, k_max)
    _report_table(f"class {report.label}", report)
    click.echo(f"member={report.member} C1={shown(report.C1)} C2={shown(report.C2)}")
    return 0


def _check_hardy(terms, ratio, start, s, direction, n_max) -> int:
    direction = Direction(direction)
    if terms:
        try:
            values = [float(v) for v in terms.split(",")]
        except ValueError:
            raise click.UsageError(f"--terms must be comma-separated numbers, got {terms!r}")
        beta = PositiveSequence.from_terms(values)
        click.echo(shown(hardy_condition(beta, s, direction, len(values) - 1)))
        return 0
    if ratio is None:
        raise click.UsageError("hardy needs --terms or --ratio")
    beta = PositiveSequence.geometric(start, ratio, 2 * n_max)
    value = hardy_condition(beta, s, direction, n_max)
    verdict, small, large = hardy_stability(
        lambda n: PositiveSequence.geometric(start, ratio, n), s, direction
    )
    console.print(f"stability: {verdict.value} ({small:.6g} -> {large:.6g})")
    click.echo(shown(value))
    return 0


# experiments


def _pairs_table(report) -> None:
    table = Table(title=f"equivalence: {report.verdict}{' (UNSAFE)' if report.unsafe else ''}")
    for column in ("pair", "low", "high", "spread", "drift"):
        table.add_column(column)
    for pair in report.pairs:
        table.add_row(f"{pair.norm_a} / {pair.norm_b}", f"{pair.coarse.low:.4g}",
                      f"{pair.coarse.high:.4g}", f"{pair.spread:.4g}", f"{pair.drift:.3g}")
    console.print(table)


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--force", is_flag=True, help="Run despite violated hypotheses (UNSAFE)")
@click.option("--out", type=click.Path(), help="Report directory")
def equiv(config_path, force, out):
    """Norm-equivalence experiment over the configured corpus."""
    config = load_config(config_path)
    corpus = generate_corpus(config.corpus)
    t = weights_from_generator(config.weights)
    report = equivalence_run(corpus, config.norms, t, config, force=force or config.force)
    _pairs_table(report)
    if out:
        write_report(report, out)
    click.echo("UNSAFE " + report.verdict if report.unsafe else report.verdict)
    return 0 if report.passed else 1


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@exponent_option("--r", 1.0, "Local L_r exponent")
@click.option("--force", is_flag=True, help="Run despite violated hypotheses (UNSAFE)")
@click.option("--out", type=click.Path(), help="Report directory")
def embed(config_path, r, force, out):
    """Local L_r embedding experiment: decay of the convolution layers."""
    config = load_config(config_path)
    corpus = generate_corpus(config.corpus)
    t = weights_from_generator(config.weights)
    grid = corpus.functions[0]
    mol = build_mollifier(grid.dim, config.mollifier.M, config.mollifier.support_radius,
                          grid.level)
    report = embedding_run(corpus, t, mol, r, config, force=force or config.force)
    if out:
        write_report(report, out)
    table = Table(title="Embedding decay")
    for column in ("function", "J", "rate", "reconstruction"):
        table.add_column(column)
    for level in report.levels:
        for fid in sorted(report.rates[level]):
            table.add_row(fid, str(level), f"{report.rates[level][fid]:.4g}",
                          f"{report.reconstruction[level][fid]:.3e}")
    console.print(table)
    for reason in report.failures:
        console.print(f"[red]{reason}[/red]")
    click.echo("UNSAFE " + report.verdict if report.unsafe else report.verdict)
    return 0 if report.passed else 1


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True),
              help="Ambient function CSV (omit to use --config)")
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Config whose corpus is traced at J and J + 1")
@exponent_option("--p", 2.0, "Sobolev exponent p")
@click.option("--l", "l", type=int, default=2, show_default=True, help="Sobolev order")
@click.option("--levels", "K", type=int, default=4, show_default=True, help="Level cap K")
@click.option("--gamma-power", type=float, default=0.0, show_default=True,
              help="gamma = |x''|^power")
@click.option("--trace-dim", type=int, default=1, show_default=True)
def trace(input_path, config_path, p, l, K, gamma_power, trace_dim):
    """Trace inequality: ||trace f|B|| / ||f|W^l_p(gamma)||."""
    if input_path:
        f = GridFunction.from_csv(input_path)
        gamma = normal_power_weight(f, gamma_power, trace_dim)
        result = trace_experiment(f, gamma, p, l, K, trace_dim)
        click.echo(shown(result.ratio))
        return 0
    if not config_path:
        raise click.UsageError("trace needs --input or --config")
    report = trace_run(load_config(config_path).corpus, p, l, K, gamma_power, trace_dim)
    for level in report.levels:
        console.print(f"J={level}: max ratio {report.bound(level):.6g}")
    click.echo(f"{'PASS' if report.passed else 'FAIL'} drift={shown(report.drift)}")
    return 0 if report.passed else 1


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and map outcomes to exit codes instead of exiting."""
    try:
        result = cli.main(args=argv, prog_name="varbesov", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        console.print("❌ aborted", style="bold red")
        return 1
    except HypothesisError as exc:
        console.print("❌ refused: hypotheses not satisfied", style="bold red")
        for violation in exc.violations:
            console.print(f"  • {violation}")
        return 2
    except ConfigError as exc:
        console.print(f"❌ configuration error: {exc}", style="bold red")
        return 1
    except VarBesovError as exc:
        console.print(f"❌ {type(exc).__name__}: {exc}", style="bold red")
        console.print(f"💡 {exc.context.recovery_suggestion}")
        return 1
    except ValueError as exc:
        console.print(f"❌ invalid parameters: {exc}", style="bold red")
        return 1
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
