# pufApp/management/base.py
"""Shared plumbing of the lab commands: config layering, the run ledger and exit codes."""
import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from ..choices import RunStatus
from ..exceptions import ConfigError
from ..forms import build_config
from ..models import ExperimentRun

logger = logging.getLogger(__name__)

EXIT_INVARIANT = 1
EXIT_CONFIG = 2


class LabCommand(BaseCommand):
    """Subclasses set ``name`` and ``default_out`` and implement ``run(config)``."""

    name = None
    default_out = ''
    # command-line dest -> config key, for flags a subclass adds
    config_flags = ()

    def add_arguments(self, parser):
        parser.add_argument('--config', help="YAML file layered over the settings defaults")
        parser.add_argument('--seed', type=int, help="master seed")
        parser.add_argument('--out', help="output path")
        parser.add_argument('--trials', type=int)
        parser.add_argument('--threads', type=int)
        self.add_lab_arguments(parser)

    def add_lab_arguments(self, parser):
        pass

    def build_config(self, options):
        overrides = {key: options.get(key) for key in ('seed', 'out', 'trials', 'threads')}
        for flag in self.config_flags:
            overrides[flag] = options.get(flag)
        if overrides.get('out') is None:
            overrides['out'] = self.default_out
        try:
            return build_config(self.name, options.get('config'), **overrides)
        except ConfigError as exc:
            raise CommandError(f"invalid configuration: {exc}", returncode=EXIT_CONFIG) from exc

    def handle(self, *args, **options):
        config = self.build_config(options)
        run = self._start_run(config)
        try:
            summary = self.run(config) or ''
        except CommandError as exc:
            self._finish_run(run, RunStatus.FAILED, exc.returncode, str(exc))
            raise
        except Exception as exc:
            self._finish_run(run, RunStatus.FAILED, EXIT_INVARIANT, repr(exc))
            raise
        self._finish_run(run, RunStatus.SUCCEEDED, 0, summary)

    def run(self, config):
        raise NotImplementedError

    # run ledger

    def _start_run(self, config):
        if not settings.HLPUF_LAB['RECORD_RUNS']:
            return None
        try:
            return ExperimentRun.objects.create(
                command=self.name, config_hash=config.digest, seed=config.seed, output_path=config.out)
        except DatabaseError as exc:
            logger.warning("run ledger unavailable (%s); continuing without it", exc)
            return None

    def _finish_run(self, run, status, exit_code, summary):
        if run is None:
            return
        try:
            run.finish(status, exit_code, summary)
        except DatabaseError as exc:
            logger.warning("could not close run %s in the ledger (%s)", run.pk, exc)

    def fail(self, message):
        self.stdout.write(self.style.ERROR(message))
        raise CommandError(message, returncode=EXIT_INVARIANT)

    @property
    def version(self):
        return settings.HLPUF_LAB['VERSION']
