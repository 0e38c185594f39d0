import os
from contextlib import contextmanager

import torch
import typer
from loguru import logger

from relgan.errors import (
    CheckpointError,
    ConfigError,
    DataError,
    GradCheckError,
    MetricError,
    PairingError,
    RelganError,
)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2

THREADS_ENV = "RELGAN_THREADS"

app = typer.Typer(add_completion=False, help="Relative-learning GAN lab for unpaired image translation.")


@app.callback()
def main():
    threads = os.environ.get(THREADS_ENV)
    if threads:
        try:
            n_threads = int(threads)
            if n_threads < 1:
                raise ValueError
        except ValueError:
            logger.error(f"{THREADS_ENV} must be a positive integer, got `{threads}`")
            raise typer.Exit(code=EXIT_USAGE)
        torch.set_num_threads(n_threads)


@contextmanager
def exit_codes():
    r"""
    Map relgan errors to the exit codes of the command line: 1 for verification
    failures, 2 for configuration, data and checkpoint errors.
    """
    try:
        yield
    except GradCheckError as e:
        logger.error(str(e))
        raise typer.Exit(code=EXIT_VERIFICATION)
    except (ConfigError, DataError, CheckpointError, MetricError, PairingError) as e:
        logger.error(str(e))
        raise typer.Exit(code=EXIT_USAGE)
    except RelganError as e:
        logger.error(f"{type(e).__name__}: {e}")
        raise typer.Exit(code=EXIT_VERIFICATION)


if __name__ == "__main__":
    app()
