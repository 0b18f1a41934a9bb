# pufApp/management/commands/selfcheck.py
from pathlib import Path

from pufApp.checks import run_checks
from pufApp.management.base import LabCommand
from pufApp.utils.artifacts import write_json


class Command(LabCommand):
    help = "Run every module's invariant suite; exits 1 when any check fails."

    name = 'selfcheck'
    default_out = 'selfcheck.json'

    def add_lab_arguments(self, parser):
        parser.add_argument('--corrupt-mub', dest='corrupt_mub', action='store_true',
                            help="check a deliberately biased MUB-8 family (negative control)")

    def handle(self, *args, **options):
        self.corrupt_mub = options.get('corrupt_mub', False)
        super().handle(*args, **options)

    def run(self, config):
        results = run_checks(config.seed, corrupt_mub=self.corrupt_mub)
        failed = [result for result in results if not result.passed]

        for result in results:
            style = self.style.SUCCESS if result.passed else self.style.ERROR
            label = 'ok' if result.passed else 'FAIL'
            detail = f"  ({result.detail})" if result.detail else ''
            self.stdout.write(style(f"  [{label:>4}] {result.suite}.{result.name}{detail}"))

        out = Path(config.out)
        write_json(out, {
            'config_hash': config.digest_with(corrupt_mub=self.corrupt_mub),
            'version': self.version,
            'seed': config.seed,
            'passed': len(results) - len(failed),
            'failed': len(failed),
            'checks': [result.as_dict() for result in results],
        })
        if failed:
            self.fail(f"{len(failed)} of {len(results)} checks failed; summary in {out}")
        self.stdout.write(self.style.SUCCESS(f"All {len(results)} checks passed; summary in {out}"))
        return f"{len(results)} checks passed"
