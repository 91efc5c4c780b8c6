import sys
from typing import Optional, Sequence

import click
from pydantic import ValidationError

from crowdagg import __version__
from crowdagg.commands.analyze import analyze
from crowdagg.commands.experiment import experiment
from crowdagg.commands.fit import fit
from crowdagg.commands.synth import synth
from crowdagg.commands.validate import validate
from crowdagg.core.config import validation_message
from crowdagg.core.errors import CrowdAggError
from crowdagg.utils.jsonio import json_line


@click.group()
@click.version_option(__version__, prog_name="crowdagg")
@click.option("--verbose", is_flag=True, default=False, help="Stream stage events as JSON lines on stderr.")
@click.pass_context
def cli(ctx: click.Context, verbose: bool):
    """Aggregate multi-criteria crowd ratings into debiased quality estimates."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose


cli.add_command(synth)
cli.add_command(fit)
cli.add_command(experiment)
cli.add_command(analyze)
cli.add_command(validate)


def _report_error(code: str, message: str, exit_code: int) -> int:
    click.echo(json_line("error", {"code": code, "message": message, "exit_code": exit_code}), err=True)
    return exit_code


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map every failure to its exit code: 1 usage, 2 data, 3 numerical."""
    try:
        rv = cli.main(args=list(argv) if argv is not None else None, prog_name="crowdagg", standalone_mode=False)
    except CrowdAggError as e:
        click.echo(json_line("error", e.to_dict()), err=True)
        return e.exit_code
    except ValidationError as e:
        return _report_error("config_error", validation_message(e), 1)
    except click.ClickException as e:
        return _report_error("usage_error", e.format_message(), 1)
    except click.Abort:
        return _report_error("aborted", "aborted", 1)
    except OSError as e:
        return _report_error("io_error", str(e), 2)
    return rv if isinstance(rv, int) else 0


def main():
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
