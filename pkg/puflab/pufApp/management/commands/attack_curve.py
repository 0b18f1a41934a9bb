# pufApp/management/commands/attack_curve.py
from functools import partial
from pathlib import Path

import numpy as np
from django.core.management.base import CommandError

from pufApp.adversary import LrConfig, append_attack_rows, run_attack
from pufApp.choices import CurveMode, Scheme
from pufApp.management.base import EXIT_CONFIG, LabCommand
from pufApp.utils.pool import ordered_map


class Command(LabCommand):
    help = "LR accuracy against q for three databases, one CSV row per (seed, q, mode).\n" \
           "Modes:\n" \
           " - cpuf: clean classical CRPs\n" \
           " - hpuf_adaptive: multi-copy extraction of unlocked HPUF responses (BB84 only)\n" \
           " - hlpuf_weak: split-attack extraction of single copies"

    name = 'attack_curve'
    default_out = 'attack_curve.csv'
    config_flags = ('n', 'k', 'scheme', 'p', 'q_grid', 'seeds', 'test_size', 'copies', 'timing')

    def add_lab_arguments(self, parser):
        parser.add_argument('--n', type=int)
        parser.add_argument('--k', type=int)
        parser.add_argument('--scheme', choices=Scheme.values)
        parser.add_argument('--p', type=float)
        parser.add_argument('--q-grid', dest='q_grid', help="comma-separated training sizes")
        parser.add_argument('--seeds', type=int, help="number of consecutive seeds starting at --seed")
        parser.add_argument('--test-size', dest='test_size', type=int)
        parser.add_argument('--copies', type=int, help="copies per challenge for the adaptive mode")
        parser.add_argument('--modes', help="comma-separated subset of " + ','.join(CurveMode.values))
        parser.add_argument('--timing', action='store_true', default=None,
                            help="record wall-clock runtimes (outputs stop being byte-identical)")

    def handle(self, *args, **options):
        requested = options.get('modes') or ','.join(CurveMode.values)
        try:
            self.modes = [CurveMode(mode) for mode in requested.split(',')]
        except ValueError as exc:
            raise CommandError(f"unknown mode in {requested!r}", returncode=EXIT_CONFIG) from exc
        super().handle(*args, **options)

    def run(self, config):
        modes = [mode for mode in self.modes
                 if not (mode == CurveMode.HPUF_ADAPTIVE and config.scheme != Scheme.BB84)]
        if len(modes) < len(self.modes):
            self.stdout.write(self.style.WARNING("hpuf_adaptive skipped: multi-copy extraction needs BB84"))

        jobs = [(seed, q, mode)
                for seed in range(config.seed, config.seed + config.seeds)
                for q in config.q_grid
                for mode in modes]
        self.stdout.write(f"Running {len(jobs)} attack points on {config.threads} thread(s)...")

        attack = partial(self._point, config=config, lr_config=LrConfig(**config.lr))
        results = ordered_map(attack, jobs, config.threads)

        out = Path(config.out)
        out.unlink(missing_ok=True)
        append_attack_rows(out, results, digest=config.digest, version=self.version)

        for mode in modes:
            means = [np.mean([r.accuracy for r in results if r.mode == mode and r.q == q]) for q in config.q_grid]
            curve = ', '.join(f"{q}:{mean:.3f}" for q, mean in zip(config.q_grid, means))
            self.stdout.write(f"  {mode:<14} {curve}")
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(results)} rows to {out}"))
        return f"{len(results)} rows"

    @staticmethod
    def _point(job, config, lr_config):
        seed, q, mode = job
        return run_attack(mode, q, seed, n=config.n, k=config.k, scheme=config.scheme, p=config.p,
                          cpuf_kind=config.cpuf_kind, test_size=config.test_size, copies=config.copies,
                          lr_config=lr_config, timing=config.timing)
