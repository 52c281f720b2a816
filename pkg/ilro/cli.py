import json
import logging.config
import sys
from logging import getLogger
from typing import Any, Dict, Optional

import click

from experiments.forms import load_config
from experiments.models import Experiment
from experiments.runners import run_experiment
from ilro import __version__, settings
from ilro.exceptions import IlroError

logger = getLogger(__name__)


def _report(error: Dict[str, Any]) -> None:
    click.echo(json.dumps(error, sort_keys=True), err=True)


class IlroGroup(click.Group):
    """Maps usage errors to exit code 1 instead of click's 2."""

    def main(self, *args, **kwargs):
        kwargs['standalone_mode'] = False
        try:
            code = super().main(*args, **kwargs)
        except click.ClickException as exc:
            _report({'error': 'UsageError', 'message': exc.format_message()})
            sys.exit(1)
        except click.Abort:
            _report({'error': 'Aborted', 'message': 'aborted'})
            sys.exit(1)
        sys.exit(code if isinstance(code, int) else 0)


@click.group(cls=IlroGroup)
@click.version_option(__version__, prog_name='ilro')
def cli():
    logging.config.dictConfig(settings.LOGGING)


def _make_command(experiment: str) -> click.Command:
    @click.command(name=experiment, help=f"Run the {experiment} experiment.")
    @click.option('--config', 'config_path', required=True, type=click.Path(dir_okay=False),
                  help='Experiment configuration (strict JSON).')
    @click.option('--out', 'output_dir', type=click.Path(file_okay=False), default=None,
                  help='Output directory; overrides the file.')
    @click.option('--oracle', is_flag=True, default=False, help='Add time-domain columns to the sweeps.')
    @click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=None, help='Monte Carlo seed.')
    @click.option('--jobs', type=click.IntRange(min=0), default=None,
                  help='Worker processes (0 means one per CPU).')
    @click.pass_context
    def command(ctx: click.Context, config_path: str, output_dir: Optional[str], oracle: bool, seed: Optional[int],
                jobs: Optional[int]):
        try:
            config = load_config(config_path, experiment=experiment, output_dir=output_dir, include_oracle=oracle,
                                 seed=seed, jobs=jobs)
            artifacts = run_experiment(config)
        except IlroError as exc:
            logger.debug("%s failed", experiment, exc_info=True)
            _report(exc.to_dict())
            ctx.exit(exc.exit_code)
        for path in artifacts.files + (artifacts.metadata,):
            click.echo(str(path))

    return command


for _experiment in Experiment:
    cli.add_command(_make_command(_experiment.value))


def main() -> None:
    cli(prog_name='ilro')


__all__ = ('cli', 'main',)
