import logging
import sys

from pydantic import ValidationError

from src.cli.controller import EXIT_INPUT, RunController
from src.cli.parser import config_from_args
from src.config import configure_logging, validate_config
from src.exceptions import InputError


def main(argv=None) -> int:
    """Command-line entry point."""
    problems = validate_config()
    if problems:
        for problem in problems:
            print(f"Configuration Error: {problem}", file=sys.stderr)
        print("Please check your .env file.", file=sys.stderr)
        return EXIT_INPUT

    try:
        config = config_from_args(argv)
    except (ValidationError, OSError, ValueError, InputError) as e:
        print(f"Invalid arguments: {e}", file=sys.stderr)
        return EXIT_INPUT

    configure_logging(config.log_level)
    logging.getLogger(__name__).debug(f"Effective configuration: {config.model_dump_json()}")
    return RunController().run(config)


if __name__ == "__main__":
    sys.exit(main())
