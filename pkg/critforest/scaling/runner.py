import json
import logging
import sys
from argparse import ArgumentParser, Namespace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from critforest.scaling import settings
from critforest.scaling.config import ExperimentConfig
from critforest.scaling.errors import (
    AccuracyError, BoundUndefinedError, BudgetError, CapacityError, ChecksumError, ConfigError, DomainError,
    ValidationError,
)
from critforest.scaling.utils import utils

logging.basicConfig(format='%(asctime)s - %(name)s - %(levelname)s - %(message)s', level=settings.LOG_LEVEL)

EXIT_OK = 0
EXIT_GATES_FAILED = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_UNEXPECTED = 4

Argument = Tuple[Sequence[str], dict]
Handler = Callable[[ExperimentConfig], int]


class MainRunner:
    def __init__(self, prog: str = 'critforest'):
        self.parser = ArgumentParser(prog=prog, description='Critical random forests: oracles, samplers, '
                                                            'exploration chain and limiting diffusion')
        self.parser.add_argument('--config', help='JSON file with experiment settings, flags win over it')
        self.parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='NAME=VALUE',
                                 help='change a whitelisted setting, e.g. --set G_ABS_TOL=1e-9')
        self.parser.add_argument('--threads', type=int, help='worker processes for replica ensembles')
        self.parser.add_argument('--quiet', action='store_true', help='no progress bars, warnings only')
        self.subparsers = self.parser.add_subparsers(dest='command', metavar='COMMAND')
        self.subparsers.required = True
        self.handlers: Dict[str, Handler] = {}
        self.logger = logging.getLogger(self.__class__.__name__)

        from critforest.scaling.command import Command
        self.command = Command(self)

    def add_command(self, name: str, func: Handler, help: str = None, arguments: List[Argument] = None):
        parser = self.subparsers.add_parser(name, help=help, description=help)
        for flags, kwargs in arguments or []:
            parser.add_argument(*flags, **kwargs)
        self.handlers[name] = func

    def config_from(self, args: Namespace) -> ExperimentConfig:
        file_values = {}
        if args.config:
            try:
                with open(args.config, encoding='utf-8') as handle:
                    file_values = json.load(handle)
            except (OSError, ValueError) as e:
                raise ConfigError(f'Could not read config {args.config}: {e}')
        flags = {key: value for key, value in vars(args).items() if key != 'config'}
        return ExperimentConfig.from_sources(file_values, flags)

    def start(self, argv: Optional[Sequence[str]] = None) -> int:
        args = self.parser.parse_args(argv)
        try:
            config = self.config_from(args)
            utils.apply_overrides(config.overrides)
            if config.threads is not None:
                utils.change_setting('THREADS', str(config.threads))
            if config.quiet:
                logging.getLogger().setLevel(logging.WARNING)
            else:
                logging.getLogger().setLevel(settings.LOG_LEVEL)
            self.logger.debug(f'Running {config.command} with {config.to_dict()}')
            return self.handlers[config.command](config)
        except (ConfigError, DomainError, ValidationError, ChecksumError, BoundUndefinedError) as e:
            self.report_error(e)
            return EXIT_INVALID
        except (AccuracyError, BudgetError, CapacityError) as e:
            self.logger.error(f'{e.__class__.__name__}: {e}')
            self.report_error(e)
            return EXIT_NUMERICAL
        except Exception as e:
            self.logger.exception(f'Unexpected error in {args.command}')
            self.report_error(e)
            return EXIT_UNEXPECTED

    @staticmethod
    def report_error(error: Exception):
        document = {'error': error.__class__.__name__, 'message': str(error),
                    'schema_version': settings.SCHEMA_VERSION}
        for attribute in ('estimate', 'bound', 'attempts', 'needed', 'capacity'):
            if hasattr(error, attribute):
                document[attribute] = getattr(error, attribute)
        sys.stdout.write(json.dumps(document, sort_keys=True, default=str) + '\n')


main_runner: MainRunner


def main(argv: Optional[Sequence[str]] = None):
    global main_runner
    main_runner = MainRunner()
    sys.exit(main_runner.start(argv))


if __name__ == '__main__':
    main()
