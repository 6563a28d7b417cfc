#!/usr/bin/env python3
"""
Permuton Command Line
=====================

PURPOSE:
Front end over the library: distances, pattern densities, approximating
permutations with certificates, low-discrepancy permutations, the
structured permutons and the decay and Galton-Watson experiments.

USAGE:
    permuton dist --a builtin:figure1 --b perm:12348765
    permuton density --sigma 132 --perm 15342
    permuton approx --measure builtin:figure1 --n 8 --method exact --out cert.json
    permuton validate cert_measure.json --certificate cert.json
    permuton decay --preset identity_quantile --out decay.csv
    permuton gw --r 1/100 --trials 1000 --generations 30

OUTPUT:
JSON documents (or CSV tables for decay and gw) go to stdout or --out and
embed the run config and the library version. Logs and summary tables go
to stderr.

EXIT CODES:
0 success, 1 usage error, 2 computation error.
"""

import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click

# Add project root to Python path
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from config.settings import (  # noqa: E402
    EXPERIMENT_DEFAULTS,
    MONTE_CARLO_CONFIG,
    load_experiment_file,
    load_experiment_presets,
    setup_logging,
    validate_configuration,
)
from permutons import __version__  # noqa: E402
from permutons.contracts import MeasureDocument, OutputFormat, RunConfig  # noqa: E402
from permutons.core import parse_permutation, to_rational, validate_measure  # noqa: E402
from permutons.lowdisc import hammersley, hammersley_constant, regularization_gap, regularize  # noqa: E402
from permutons.metrics import (  # noqa: E402
    grid_block_distance,
    pattern_density_measure,
    pattern_density_perm,
    rect_distance,
    rect_distance_interval,
    star_discrepancy,
)
from permutons.optimize import (  # noqa: E402
    ApproxMethod,
    decay_experiment,
    exact_dn,
    exhaustive_dn,
    heuristic_certificate,
    local_search_dn,
)
from permutons.rng import seed_sequence  # noqa: E402
from permutons.selfsimilar import (  # noqa: E402
    brownian_build,
    brownian_marginal_deviation,
    brownian_sample_perm,
    choose_sequence,
    fractal_level_bounds,
    fractal_permutation,
    gw_mean_offspring,
    gw_offspring_estimate,
    gw_survival_estimate,
)
from tools.file_utils import (  # noqa: E402
    load_certificate,
    load_measure_source,
    render_permutation,
    render_point_set,
    write_file,
)
from workflows.exception_handler import EXIT_CODES, ExceptionHandler  # noqa: E402
from workflows.reporting import (  # noqa: E402
    ReportRow,
    build_output,
    decay_summary,
    emit_report,
    show,
    survival_summary,
    write_output,
)

logger = logging.getLogger(__name__)

# 🔧 ADAPT: command-line names for approximation methods
METHOD_ALIASES = {
    "exact": ApproxMethod.BRANCH_AND_BOUND,
    "bnb": ApproxMethod.BRANCH_AND_BOUND,
    "exhaustive": ApproxMethod.EXHAUSTIVE,
    "local": ApproxMethod.LOCAL_SEARCH,
    "quantile": ApproxMethod.QUANTILE,
    "hammersley": ApproxMethod.HAMMERSLEY_REGULARIZED,
}
METHOD_ALIASES.update({method.value: method for method in ApproxMethod})


class RationalType(click.ParamType):
    """Option values such as 1/2, 0.25 or 3."""

    name = "rational"

    def convert(self, value, param, ctx):
        if isinstance(value, Fraction):
            return value
        try:
            return to_rational(value)
        except (ValueError, TypeError):
            self.fail(f"{value!r} is not a rational like 1/2 or 0.25", param, ctx)


RATIONAL = RationalType()


class WarningCollector(logging.Handler):
    """Keeps the warnings logged during one command for the output document."""

    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages: List[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(record.getMessage())


# ============================================================================
# HELPERS
# ============================================================================


def _method(name: str) -> ApproxMethod:
    try:
        return METHOD_ALIASES[name]
    except KeyError:
        raise click.UsageError(f"unknown method {name!r}; choose from {', '.join(sorted(METHOD_ALIASES))}")


def _split(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in _split(text)]
    except ValueError:
        raise click.UsageError(f"expected comma separated integers, got {text!r}")


def _experiment_block(command: str, preset: Optional[str], config_file: Optional[str]) -> Dict[str, Any]:
    if preset and config_file:
        raise click.UsageError("use --preset or --config, not both")
    if config_file:
        block, origin = load_experiment_file(config_file), config_file
    elif preset:
        presets = load_experiment_presets()
        if preset not in presets:
            raise click.UsageError(f"unknown preset {preset!r}; choose from {', '.join(sorted(presets))}")
        block, origin = presets[preset], preset
    else:
        return {}
    if block.get("command", command) != command:
        raise click.UsageError(f"{origin} configures `{block['command']}`, not `{command}`")
    return block


def _params(**values: Any) -> Dict[str, Any]:
    """Config parameters as JSON-friendly values; rationals become 'p/q'."""
    params = {}
    for key, value in values.items():
        if value is None:
            continue
        params[key] = str(value) if isinstance(value, Fraction) else value
    return params


def _header(config: RunConfig) -> str:
    return f"permuton-approx {__version__} " + json.dumps(config.model_dump(mode="json"), sort_keys=True)


def _emit(ctx: click.Context, config: RunConfig, result: Dict[str, Any]) -> None:
    document = build_output(config, result, ctx.obj["warnings"].messages)
    text = write_output(document, config.output)
    if config.output is None:
        click.echo(text, nl=False)
    else:
        logger.info("wrote %s", config.output)


def _emit_text(config: RunConfig, text: str) -> None:
    if config.output is None:
        click.echo(text, nl=False)
    else:
        write_file(config.output, text)
        logger.info("wrote %s", config.output)


def _emit_rows(ctx: click.Context, config: RunConfig, rows: Sequence[ReportRow], result: Dict[str, Any]) -> None:
    """CSV tables keep a bare header; the config goes to a sidecar next to --out."""
    if config.format == OutputFormat.CSV.value:
        text = emit_report(rows, config.output)
        if config.output is None:
            click.echo(text, nl=False)
        else:
            sidecar = f"{config.output}.config.json"
            write_output(build_output(config, {"report": Path(config.output).name, "rows": len(rows)},
                                      ctx.obj["warnings"].messages), sidecar)
    else:
        _emit(ctx, config, result)


# ============================================================================
# COMMAND GROUP
# ============================================================================


@click.group()
@click.version_option(__version__, prog_name="permuton")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
@click.option("--log-file", default=None, type=click.Path(), help="Also log to this file")
@click.option("--threads", default=None, type=click.IntRange(min=1), help="Worker threads (PERMUTON_THREADS)")
@click.pass_context
def cli(ctx: click.Context, log_level: Optional[str], log_file: Optional[str], threads: Optional[int]):
    """Exact distances and approximations for permutons."""
    setup_logging(log_level, log_file)
    collector = WarningCollector()
    logging.getLogger().addHandler(collector)
    ctx.call_on_close(lambda: logging.getLogger().removeHandler(collector))
    ctx.obj = {"warnings": collector, "threads": threads}


@cli.command()
@click.option("--a", "source_a", required=True, help="First measure source")
@click.option("--b", "source_b", required=True, help="Second measure source")
@click.option("--grid-only", is_flag=True, help="Maximum over merged-grid rectangles only")
@click.option("--interval", "m", type=click.IntRange(min=1), default=None, help="Bracket on an m x m coarse grid")
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def dist(ctx, source_a, source_b, grid_only, m, out):
    """Rectangular distance between two measures."""
    if grid_only and m:
        raise click.UsageError("--grid-only and --interval exclude each other")
    mu, nu = load_measure_source(source_a), load_measure_source(source_b)
    if m:
        result = rect_distance_interval(mu, nu, m)
    elif grid_only:
        result = grid_block_distance(mu, nu)
    else:
        result = rect_distance(mu, nu)
    config = RunConfig(
        command="dist",
        measure=source_a,
        params=_params(b=source_b, grid_only=grid_only or None, m=m),
        output=out,
    )
    _emit(ctx, config, result.to_dict())


@cli.command()
@click.option("--a", "source_a", required=True)
@click.option("--b", "source_b", required=True)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def star(ctx, source_a, source_b, out):
    """Star discrepancy between two measures."""
    result = star_discrepancy(load_measure_source(source_a), load_measure_source(source_b))
    config = RunConfig(command="star", measure=source_a, params=_params(b=source_b), output=out)
    _emit(ctx, config, result.to_dict())


@cli.command()
@click.option("--sigma", required=True, help="Pattern in one-line notation, at most 8 entries")
@click.option("--perm", "perm_text", default=None, help="Exact density in this permutation")
@click.option("--measure", "measure_source", default=None, help="Monte Carlo density in this permuton")
@click.option("--samples", type=click.IntRange(min=1), default=MONTE_CARLO_CONFIG["default_samples"])
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def density(ctx, sigma, perm_text, measure_source, samples, seed, out):
    """Pattern density t(sigma, .) in a permutation or a permuton."""
    if (perm_text is None) == (measure_source is None):
        raise click.UsageError("give exactly one of --perm and --measure")
    pattern = parse_permutation(sigma)
    if perm_text is not None:
        pi = parse_permutation(perm_text)
        value = pattern_density_perm(pattern, pi)
        config = RunConfig(command="density", params=_params(sigma=sigma, perm=perm_text), seed=seed, output=out)
        result = {"sigma": str(pattern), "density": str(value), "density_float": float(value)}
    else:
        mu = load_measure_source(measure_source)
        estimate = pattern_density_measure(pattern, mu, samples, seed, threads=ctx.obj["threads"])
        config = RunConfig(
            command="density", measure=measure_source, params=_params(sigma=sigma, samples=samples),
            seed=seed, output=out,
        )
        result = {"sigma": str(pattern), **estimate.to_dict()}
    _emit(ctx, config, result)


@cli.command()
@click.option("--measure", "measure_source", required=True)
@click.option("--n", "n", type=click.IntRange(min=1), required=True)
@click.option("--method", default="exact", help=f"One of {', '.join(sorted(METHOD_ALIASES))}")
@click.option("--budget", type=click.IntRange(min=1), default=None, help="Search expansions or evaluations")
@click.option("--seed", type=int, default=0)
@click.option("--init", "init", default="quantile", help="Local search start: a method, identity, random or a permutation")
@click.option("--restarts", type=click.IntRange(min=0), default=4)
@click.option("--all-minimizers", is_flag=True)
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def approx(ctx, measure_source, n, method, budget, seed, init, restarts, all_minimizers, out):
    """Approximate a permuton by a permutation of size n, with a certificate."""
    chosen = _method(method)
    mu = load_measure_source(measure_source)
    threads = ctx.obj["threads"]
    if chosen is ApproxMethod.BRANCH_AND_BOUND:
        certificate = exact_dn(mu, n, budget=budget, all_minimizers=all_minimizers, threads=threads)
    elif chosen is ApproxMethod.EXHAUSTIVE:
        certificate = exhaustive_dn(mu, n)
    elif chosen is ApproxMethod.LOCAL_SEARCH:
        if init in ("identity", "random"):
            start = init
        elif init in METHOD_ALIASES:
            start = _method(init)
        else:
            start = parse_permutation(init)
        certificate = local_search_dn(mu, n, init=start, budget=budget, seed=seed, restarts=restarts, threads=threads)
    else:
        certificate = heuristic_certificate(mu, n, chosen)
    config = RunConfig(
        command="approx",
        measure=measure_source,
        params=_params(
            n=n, method=chosen.value, budget=budget,
            init=init if chosen is ApproxMethod.LOCAL_SEARCH else None,
            restarts=restarts if chosen is ApproxMethod.LOCAL_SEARCH else None,
        ),
        seed=seed,
        output=out,
    )
    _emit(ctx, config, certificate.to_dict())


@cli.command()
@click.option("--n", "n", type=click.IntRange(min=1), required=True)
@click.option("--emit", type=click.Choice(["json", "points", "perm"]), default="json")
@click.option("--check", is_flag=True, help="Add the Hammersley constant and the regularization gap")
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def lowdisc(ctx, n, emit, check, out):
    """The Hammersley point set of size n and its regularized permutation."""
    points = hammersley(n)
    pi = regularize(points)
    config = RunConfig(command="lowdisc", params=_params(n=n, emit=emit, check=check or None), output=out)
    if emit == "points":
        _emit_text(config, render_point_set(points, _header(config)))
        return
    if emit == "perm":
        _emit_text(config, render_permutation(pi, _header(config)))
        return
    result: Dict[str, Any] = {
        "points": [[str(x), str(y)] for x, y in points],
        "permutation": list(pi.values),
    }
    if check:
        gap = regularization_gap(points)
        constant = hammersley_constant(n)
        result["hammersley_constant"] = str(constant)
        result["regularization_gap"] = {
            "constant": str(gap.constant),
            "gap": str(gap.gap),
            "bound": str(gap.bound),
            "holds": gap.holds,
        }
    _emit(ctx, config, result)


@cli.command()
@click.option("--alpha", type=RATIONAL, required=True)
@click.option("--beta", type=RATIONAL, required=True)
@click.option("--betap", "beta_prime", type=RATIONAL, required=True)
@click.option("--n1", type=click.IntRange(min=2), required=True)
@click.option("--K", "--k", "K", type=click.IntRange(min=1), default=3)
@click.option("--bounds", is_flag=True, help="Check distances between successive levels")
@click.option("--emit", type=click.Choice(["json", "perm"]), default="json")
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def fractal(ctx, alpha, beta, beta_prime, n1, K, bounds, emit, out):
    """Self-similar permutation from a growth plan."""
    plan = choose_sequence(alpha, beta, beta_prime, n1, K)
    pi = fractal_permutation(plan, K)
    config = RunConfig(
        command="fractal",
        params=_params(alpha=alpha, beta=beta, beta_prime=beta_prime, n1=n1, K=K, bounds=bounds or None, emit=emit),
        output=out,
    )
    if emit == "perm":
        _emit_text(config, render_permutation(pi, _header(config)))
        return
    result: Dict[str, Any] = {"plan": plan.to_dict(), "size": pi.n, "permutation": list(pi.values)}
    if bounds:
        constant, levels = fractal_level_bounds(plan, K)
        result["block_constant"] = constant
        result["levels"] = [
            {
                "k": level.k,
                "distance": str(level.distance),
                "bound": str(level.bound),
                "bound_float": float(level.bound),
                "holds": level.holds,
            }
            for level in levels
        ]
    _emit(ctx, config, result)


@cli.command()
@click.option("--p", "p", type=RATIONAL, required=True)
@click.option("--eps", type=RATIONAL, default="1/1000")
@click.option("--depth", type=click.IntRange(min=0), default=12)
@click.option("--seed", type=int, default=0)
@click.option("--emit", type=click.Choice(["measure", "perm", "summary"]), default="measure")
@click.option("--k", "k", type=click.IntRange(min=1), default=10, help="Sample size for --emit perm")
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def brownian(ctx, p, eps, depth, seed, emit, k, out):
    """Truncated biased Brownian separable permuton."""
    build = brownian_build(p, eps, depth, seed)
    config = RunConfig(
        command="brownian",
        params=_params(p=p, eps=eps, depth=depth, emit=emit, k=k if emit == "perm" else None),
        seed=seed,
        output=out,
    )
    deviation = brownian_marginal_deviation(build)
    result: Dict[str, Any] = {
        "leaves": build.tree.leaves(),
        "height": build.tree.height(),
        "primitives": len(build.measure.primitives),
        "marginal_deviation": str(deviation),
        "tolerance": str(build.tolerance),
    }
    if emit == "measure":
        result["measure"] = MeasureDocument.from_measure(build.measure).model_dump(exclude_none=True)
    elif emit == "perm":
        # independent of the build stream
        sample_seed = seed_sequence(seed).spawn(1)[0]
        result["permutation"] = list(brownian_sample_perm(build, k, sample_seed).values)
    _emit(ctx, config, result)


@cli.command()
@click.option("--r", "r", type=RATIONAL, default=None)
@click.option("--trials", type=click.IntRange(min=1), default=None)
@click.option("--generations", type=click.IntRange(min=1), default=None)
@click.option("--samples", type=click.IntRange(min=0), default=None, help="Offspring draws; 0 skips the estimate")
@click.option("--seed", type=int, default=None)
@click.option("--preset", default=None)
@click.option("--config", "config_file", default=None, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def gw(ctx, r, trials, generations, samples, seed, preset, config_file, fmt, out):
    """Galton-Watson tree of the Brownian decomposition: offspring mean and survival."""
    block = _experiment_block("gw", preset, config_file)
    if r is None:
        if "r" not in block:
            raise click.UsageError("gw needs --r or a preset")
        r = RATIONAL.convert(block["r"], None, ctx)
    trials = trials or block.get("trials", EXPERIMENT_DEFAULTS["gw_trials"])
    generations = generations or block.get("generations", EXPERIMENT_DEFAULTS["gw_generations"])
    samples = samples if samples is not None else block.get("samples", 0)
    seed = seed if seed is not None else block.get("seed", 0)
    survival_seed, offspring_seed = seed_sequence(seed).spawn(2)
    threads = ctx.obj["threads"]

    estimate = gw_survival_estimate(r, trials, generations, survival_seed, threads=threads)
    mean = gw_mean_offspring(r)
    result: Dict[str, Any] = {"r": str(r), "mean_offspring": mean, "survival": estimate.to_dict()}
    if samples:
        result["offspring"] = gw_offspring_estimate(r, samples, offspring_seed, threads=threads).to_dict()
    show(survival_summary(r, estimate, mean))
    config = RunConfig(
        command="gw",
        params=_params(r=r, trials=trials, generations=generations, samples=samples, preset=preset),
        seed=seed,
        output=out,
        format=fmt,
    )
    _emit_rows(ctx, config, [ReportRow.from_survival(r, estimate, seed)], result)


@cli.command()
@click.option("--measure", "measure_source", default=None)
@click.option("--methods", default=None, help="Comma separated, e.g. quantile,local")
@click.option("--sizes", default=None, help="Comma separated sizes, e.g. 2,4,8")
@click.option("--budget", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--preset", default=None)
@click.option("--config", "config_file", default=None, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def decay(ctx, measure_source, methods, sizes, budget, seed, preset, config_file, fmt, out):
    """Distance against n for several approximation methods."""
    block = _experiment_block("decay", preset, config_file)
    measure_source = measure_source or block.get("measure")
    if measure_source is None:
        raise click.UsageError("decay needs --measure or a preset")
    method_names = _split(methods) if methods else block.get("methods", EXPERIMENT_DEFAULTS["decay_methods"])
    n_list = _int_list(sizes) if sizes else [int(n) for n in block.get("sizes", EXPERIMENT_DEFAULTS["decay_sizes"])]
    budget = budget or block.get("budget")
    seed = seed if seed is not None else block.get("seed", 0)
    chosen = [_method(name) for name in method_names]

    table = decay_experiment(load_measure_source(measure_source), chosen, n_list, budget=budget, seed=seed)
    show(decay_summary(table))
    config = RunConfig(
        command="decay",
        measure=measure_source,
        params=_params(methods=[m.value for m in chosen], sizes=n_list, budget=budget, preset=preset),
        seed=seed,
        output=out,
        format=fmt,
    )
    rows = [ReportRow.from_decay(row) for row in table.rows]
    result = {"measure": table.measure, "rows": [row.to_dict() for row in rows], "slopes": table.slopes}
    _emit_rows(ctx, config, rows, result)


@cli.command()
@click.argument("source", required=False)
@click.option("--tolerance", type=RATIONAL, default="0", help="Largest accepted marginal deviation")
@click.option("--measure-only", is_flag=True, help="Only check the total mass")
@click.option("--certificate", default=None, type=click.Path(), help="Recheck a certificate against SOURCE")
@click.option("--out", default=None, type=click.Path())
@click.pass_context
def validate(ctx, source, tolerance, measure_only, certificate, out):
    """
    Check the configuration, a measure and optionally a certificate.

    Exits 2 when a check fails and 1 on usage errors.
    """
    config_ok, config_errors = validate_configuration()
    result: Dict[str, Any] = {"configuration": {"ok": config_ok, "errors": config_errors}}
    ok = config_ok
    if source is not None:
        mu = load_measure_source(source)
        report = validate_measure(mu, permuton=not measure_only, tolerance=tolerance)
        result["measure"] = report.to_dict()
        ok = ok and report.ok
        if certificate is not None:
            cert = load_certificate(certificate, mu)
            result["certificate"] = {"path": certificate, "distance": str(cert.distance), "verified": True}
    elif certificate is not None:
        raise click.UsageError("--certificate needs the measure SOURCE it was computed for")
    config = RunConfig(
        command="validate",
        measure=source,
        params=_params(tolerance=tolerance, measure_only=measure_only or None, certificate=certificate),
        output=out,
    )
    _emit(ctx, config, result)
    if not ok:
        ctx.exit(EXIT_CODES["computation"])


# ============================================================================
# ENTRY POINTS
# ============================================================================


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code instead of exiting."""
    setup_logging()
    handler = ExceptionHandler()
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="permuton", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 1
    except Exception as exc:  # noqa: BLE001
        return handler.resolve(exc).exit_code
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
