import logging

import click
from dotenv import load_dotenv

from commands.floquet import floquet
from commands.meanfield import meanfield
from commands.rwa import rwa
from commands.sweep import sweep
from config.config import Config

# Load environment variables
load_dotenv()

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def configure_logging(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        force=True,
    )


def create_cli():
    """Create the command group and register the commands."""
    @click.group()
    @click.option('-v', '--verbose', is_flag=True, help='Debug logging.')
    @click.version_option('1.0.0', prog_name='twofold-squeeze')
    def cli(verbose):
        """Two-fold mechanical squeezing simulator."""
        configure_logging(verbose)
        logger.debug(f"Output directory: {Config.output_dir()}")

    cli.add_command(meanfield)
    cli.add_command(floquet)
    cli.add_command(rwa)
    cli.add_command(sweep)
    return cli


cli = create_cli()

if __name__ == '__main__':
    cli()
