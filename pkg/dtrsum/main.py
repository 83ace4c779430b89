import logging
import uuid

import click

from dtrsum.commands.evaluate import evaluate_command
from dtrsum.commands.gradcheck import gradcheck_command
from dtrsum.commands.infer import infer_command
from dtrsum.commands.synth import synth_command
from dtrsum.commands.train import train_command
from dtrsum.commands.visualize import visualize_command
from dtrsum.core.config import LOG_FORMAT, LOG_LEVEL
from dtrsum.core.errors import ExitCode, SummarizerError
from dtrsum.core.logging_config import setup_logging

logger = logging.getLogger(__name__)


class SummarizerGroup(click.Group):
    """
    click group that maps failures onto the documented exit codes.

    usage errors (unknown flags, bad values) exit with 1, SummarizerError
    subclasses with their own exit code.
    """

    def parse_args(self, ctx, args):
        try:
            return super().parse_args(ctx, args)
        except click.UsageError as e:
            e.exit_code = ExitCode.VALIDATION
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = ExitCode.VALIDATION
            raise
        except SummarizerError as e:
            logger.error(f"{type(e).__name__}: {e.detail}", exc_info=logger.isEnabledFor(logging.DEBUG))
            click.echo(f"error: {e.detail}", err=True)
            ctx.exit(e.exit_code)


@click.group(cls=SummarizerGroup)
@click.option("--log-level", default=LOG_LEVEL, show_default=True, help="Logging verbosity.")
@click.option(
    "--log-format", type=click.Choice(["json", "plain"]), default=LOG_FORMAT, show_default=True, help="Log layout."
)
@click.pass_context
def cli(ctx, log_level, log_format):
    """frame-level video summarization with dilated temporal relations and adversarial training."""

    run_id = uuid.uuid4().hex
    setup_logging(log_level, log_format, run_id=run_id)
    ctx.obj = {"run_id": run_id}
    logger.info(f"run started: {ctx.invoked_subcommand}")


cli.add_command(synth_command)
cli.add_command(train_command)
cli.add_command(infer_command)
cli.add_command(evaluate_command)
cli.add_command(gradcheck_command)
cli.add_command(visualize_command)


if __name__ == "__main__":
    cli()
