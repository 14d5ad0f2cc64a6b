# main.py
"""
ReproMC command line.

Usage:
    python main.py experiment normal --runs 10 --out output/normal.csv
    python main.py experiment asset-or-nothing --orderings raw,sorted,permuted:7 --workers 4
    python main.py sum --algo kahan --input values.txt --precision binary32
    python main.py table --input output/normal.csv --out table1.md

Exit codes: 0 on success, 1 on a configuration or usage error, 2 on an I/O error.
"""
import sys
from pathlib import Path
from typing import List, Optional

import click
from rich.console import Console

from config import load_settings
from csv_utils import read_value_lines
from errors import ConfigError, ReportIOError, ReproMCError
from exact_oracle import error_report, round_to
from experiments import ExperimentKind, default_config, read_report, run_experiment, sum_file
from float_utils import format_float, resolve_precision, to_bits_hex
from logger_setup import configure_logging, get_logger
from table_formatter import markdown_table, print_report

logger = get_logger(__name__)

EXIT_CONFIG = 1
EXIT_IO = 2


class ReproGroup(click.Group):
    """Command group that maps ReproMC errors onto the documented exit codes."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args=args, prog_name=prog_name, complete_var=complete_var,
                              standalone_mode=False, **extra)
        except click.UsageError as exc:
            exc.show()
            sys.exit(EXIT_CONFIG)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_CONFIG)
        except ReportIOError as exc:
            click.echo(f"I/O error: {exc}", err=True)
            sys.exit(EXIT_IO)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except ReproMCError as exc:
            logger.error("%s: %s", type(exc).__name__, exc)
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        sys.exit(rv if isinstance(rv, int) else 0)


def _split(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


@click.group(cls=ReproGroup)
@click.option("--log-level", default=None, help="Override LOG_LEVEL (DEBUG, INFO, WARNING, ERROR).")
@click.pass_context
def main(ctx: click.Context, log_level: Optional[str]):
    """Reproducible streaming statistics and Monte-Carlo experiments."""
    settings = load_settings()
    configure_logging(log_level or settings.log_level, settings.log_file)
    ctx.obj = settings


@main.command()
@click.argument("kind", type=click.Choice([k.value for k in ExperimentKind]))
@click.option("--seed", type=int, default=None, help="64-bit seed; run r uses seed + r.")
@click.option("--n", "n", type=int, default=None, help="Samples or paths per run.")
@click.option("--runs", type=int, default=None, help="Number of runs.")
@click.option("--orderings", default="raw,sorted", show_default=True,
              help="Comma list of raw, sorted, permuted:<seed>.")
@click.option("--algos", default=None, help="Comma list of algorithm tags.")
@click.option("--workers", type=int, default=None, help="Worker threads for Monte-Carlo runs.")
@click.option("--block-size", type=int, default=None, help="Paths per work unit.")
@click.option("--epsilon", type=float, default=None, help="Relative spot bump for Gamma.")
@click.option("--rebate", type=float, default=None, help="Cash-or-nothing rebate.")
@click.option("--precision", default=None, help="binary32 or binary64.")
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None, help="CSV report path.")
@click.option("--records", type=click.Path(dir_okay=False), default=None, help="JSON-lines run records.")
@click.option("--audit", is_flag=True, help="Check ordering multisets and block index ranges.")
@click.option("--no-table", is_flag=True, help="Skip the console table.")
@click.pass_obj
def experiment(settings, kind, seed, n, runs, orderings, algos, workers, block_size, epsilon,
               rebate, precision, out, records, audit, no_table):
    """Run one of the four experiments and write its error report as CSV."""
    output = Path(out) if out else settings.output_dir / f"{kind}.csv"
    config = default_config(
        kind,
        seed=settings.seed if seed is None else seed,
        n=n,
        runs=runs,
        orderings=_split(orderings),
        algorithms=_split(algos),
        workers=settings.workers if workers is None else workers,
        block_size=settings.block_size if block_size is None else block_size,
        epsilon=epsilon,
        rebate=rebate,
        precision=precision,
        output=output,
        records_path=Path(records) if records else settings.records_path,
        audit=audit or None,
    )
    report = run_experiment(config)
    if not no_table:
        print_report(report, Console(), title=f"{kind} (n={config.n}, runs={config.runs})")
    click.echo(f"wrote {output}")


@main.command("sum")
@click.option("--algo", required=True, help="Algorithm tag or alias (naive, kahan, klein, knuth).")
@click.option("--input", "input_path", required=True, help="File with one float per line.")
@click.option("--precision", default="binary64", show_default=True, help="binary32 or binary64.")
def sum_command(algo, input_path, precision):
    """Accumulate a file of floats and compare S, M and V with the exact values."""
    precision = resolve_precision(precision)
    stats, exact = sum_file(read_value_lines(input_path), algo, precision)
    click.echo(f"algorithm={stats.algorithm.value} precision={precision} n={stats.n}")
    for name, approx, reference in (("S", stats.sum, exact.sum),
                                    ("M", stats.mean, exact.mean),
                                    ("V", stats.variance, exact.variance)):
        err = error_report(approx, reference, precision)
        click.echo(
            f"{name} = {format_float(approx, precision)} bits={to_bits_hex(approx, precision)} "
            f"exact={format_float(round_to(reference, precision), precision)} "
            f"abs_err={err.absolute:.3E} rel_err={err.relative:.3E} ulps={err.ulps:g}"
        )


@main.command()
@click.option("--input", "input_path", required=True, help="CSV report written by `experiment`.")
@click.option("--out", "out", default=None, help="Markdown output file; stdout when omitted.")
@click.option("--error", "error_field", type=click.Choice(["abs_error", "rel_error", "ulps"]), default=None,
              help="Error column to tabulate; defaults per experiment.")
def table(input_path, out, error_field):
    """Render a CSV report as a Markdown error table."""
    text = markdown_table(read_report(input_path), error_field)
    if not out:
        click.echo(text, nl=False)
        return
    try:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(out, f"cannot write table: {exc.strerror or exc}") from exc
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
