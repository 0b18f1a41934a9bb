# pufApp/management/commands/bounds.py
from pathlib import Path

from django import forms
from django.core.management.base import CommandError

from pufApp.analytics import bounds_table
from pufApp.forms import FloatListField, IntegerListField
from pufApp.management.base import EXIT_CONFIG, LabCommand
from pufApp.utils.artifacts import write_csv

DEFAULT_P_GRID = '0.5,0.55,0.6,0.75,1.0'
DEFAULT_K_GRID = ','.join(str(k) for k in range(17))
DEFAULT_ZETA_GRID = '0,0.01,0.05,0.1,0.25,0.5'


class Command(LabCommand):
    help = "Closed-form bound tables (p_guess, p_extract, forge, reuse, minentropy) as one long CSV."

    name = 'bounds'
    default_out = 'bounds.csv'
    config_flags = ('m', 'q_grid', 'eps_grid')

    def add_lab_arguments(self, parser):
        parser.add_argument('--m', type=int, help="qubits per half")
        parser.add_argument('--m-grid', dest='m_grid', help="comma-separated m values (default: --m)")
        parser.add_argument('--q-grid', dest='q_grid')
        parser.add_argument('--eps-grid', dest='eps_grid')
        parser.add_argument('--p-grid', dest='p_grid', default=DEFAULT_P_GRID)
        parser.add_argument('--k-grid', dest='k_grid', default=DEFAULT_K_GRID)
        parser.add_argument('--zeta-grid', dest='zeta_grid', default=DEFAULT_ZETA_GRID)
        parser.add_argument('--p-classical', dest='p_classical', type=float, default=1.0,
                            help="classical forging probability multiplied into the forge curve")

    def handle(self, *args, **options):
        try:
            self.grids = {
                'm_grid': IntegerListField(required=False).clean(options.get('m_grid')),
                'p_grid': FloatListField().clean(options['p_grid']),
                'k_grid': IntegerListField().clean(options['k_grid']),
                'zeta_grid': FloatListField().clean(options['zeta_grid']),
            }
        except forms.ValidationError as exc:
            raise CommandError(f"invalid grid: {' '.join(exc.messages)}", returncode=EXIT_CONFIG) from exc
        problems = []
        if any(not 0.5 <= p <= 1.0 for p in self.grids['p_grid']):
            problems.append("p values must lie in [0.5, 1]")
        if any(not 0.0 <= zeta <= 0.5 for zeta in self.grids['zeta_grid']):
            problems.append("zeta values must lie in [0, 0.5]")
        if any(k < 0 for k in self.grids['k_grid']) or any(m < 1 for m in self.grids['m_grid']):
            problems.append("k must be >= 0 and m >= 1")
        if not 0.0 <= options['p_classical'] <= 1.0:
            problems.append("--p-classical must lie in [0, 1]")
        if problems:
            raise CommandError("invalid grid: " + '; '.join(problems), returncode=EXIT_CONFIG)
        self.p_classical = options['p_classical']
        super().handle(*args, **options)

    def run(self, config):
        m_grid = self.grids['m_grid'] or [config.m]
        table = bounds_table(p_grid=self.grids['p_grid'], m_grid=m_grid, q_grid=config.q_grid,
                             eps_grid=config.eps_grid or [0.0], k_grid=self.grids['k_grid'],
                             zeta_grid=self.grids['zeta_grid'], p_classical=self.p_classical)
        digest = config.digest_with(p_classical=self.p_classical, **{**self.grids, 'm_grid': m_grid})
        out = write_csv(Path(config.out), table, digest=digest, version=self.version)
        for curve, rows in table.groupby('curve', sort=True):
            self.stdout.write(f"  {curve:<11} {len(rows)} rows")
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(table)} rows to {out}"))
        return f"{len(table)} rows"
