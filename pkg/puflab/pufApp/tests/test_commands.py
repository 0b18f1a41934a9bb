import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import orjson
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.db import DatabaseError
from django.test import TestCase, override_settings

from pufApp.adversary import ATTACK_COLUMNS
from pufApp.analytics import BOUND_COLUMNS
from pufApp.choices import RunStatus
from pufApp.models import ExperimentRun
from pufApp.utils.artifacts import read_csv


@override_settings(HLPUF_LAB={**settings.HLPUF_LAB, 'RECORD_RUNS': True})
class LabCommandTestCase(TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def path(self, name):
        return str(Path(self.directory.name) / name)

    def call(self, command, **options):
        stdout = StringIO()
        call_command(command, stdout=stdout, **options)
        return stdout.getvalue()


class BoundsCommandTests(LabCommandTestCase):

    def test_writes_the_long_table(self):
        out = self.path('bounds.csv')
        output = self.call('bounds', m=2, q_grid='0,10', eps_grid='0,0.2', out=out)
        self.assertIn('Wrote', output)
        self.assertTrue(Path(out).read_text(encoding='utf-8').startswith('# puflab 0.1'))
        table = read_csv(out)
        self.assertEqual(list(table.columns), BOUND_COLUMNS)
        self.assertEqual(set(table['curve']), {'p_guess', 'p_extract', 'forge', 'reuse', 'minentropy'})

    def test_identical_runs_identical_bytes(self):
        first, second = self.path('a.csv'), self.path('b.csv')
        self.call('bounds', m=2, q_grid='0,10', out=first)
        self.call('bounds', m=2, q_grid='0,10', out=second)
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())

    def test_bad_grid_exits_with_config_code(self):
        with self.assertRaises(CommandError) as raised:
            self.call('bounds', p_grid='0.3', out=self.path('bounds.csv'))
        self.assertEqual(raised.exception.returncode, 2)

    def test_run_is_recorded(self):
        self.call('bounds', m=2, q_grid='0,10', out=self.path('bounds.csv'))
        run = ExperimentRun.objects.for_command('bounds').get()
        self.assertEqual((run.status, run.exit_code), (RunStatus.SUCCEEDED, 0))
        self.assertEqual(len(run.config_hash), 64)

    def test_missing_ledger_is_not_fatal(self):
        with mock.patch.object(ExperimentRun.objects, 'create', side_effect=DatabaseError('no table')):
            with self.assertLogs('pufApp.management.base', level='WARNING'):
                self.call('bounds', m=2, q_grid='0,10', out=self.path('bounds.csv'))
        self.assertTrue(Path(self.path('bounds.csv')).is_file())


class AttackCurveCommandTests(LabCommandTestCase):

    def test_one_row_per_point(self):
        out = self.path('curve.csv')
        self.call('attack_curve', seed=1, n=8, k=1, q_grid='0,50', seeds=1, test_size=200,
                  modes='cpuf,hlpuf_weak', out=out)
        table = read_csv(out)
        self.assertEqual(list(table.columns), ATTACK_COLUMNS)
        self.assertEqual(len(table), 4)
        self.assertEqual(set(table['mode']), {'cpuf', 'hlpuf_weak'})
        self.assertTrue((table['runtime_ms'] == 0).all())

    def test_reruns_are_byte_identical(self):
        first, second = self.path('a.csv'), self.path('b.csv')
        for out in (first, second):
            self.call('attack_curve', seed=2, n=8, k=1, q_grid='0,40', seeds=1, test_size=100,
                      modes='cpuf,hpuf_adaptive', copies=4, out=out)
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())

    def test_seed_is_required(self):
        with self.assertRaises(CommandError) as raised:
            self.call('attack_curve', out=self.path('curve.csv'))
        self.assertEqual(raised.exception.returncode, 2)

    def test_unknown_mode(self):
        with self.assertRaises(CommandError) as raised:
            self.call('attack_curve', seed=1, modes='cpuf,oracle', out=self.path('curve.csv'))
        self.assertEqual(raised.exception.returncode, 2)


class ProtocolSessionCommandTests(LabCommandTestCase):

    def test_honest_session(self):
        out = self.path('session.json')
        self.call('protocol_session', seed=3, rounds=20, db_size=30, out=out)
        report = orjson.loads(Path(out).read_bytes())['report']
        self.assertEqual(report['accepted'], 20)
        self.assertTrue(Path(self.path('session.jsonl')).is_file())

    def test_forced_failure(self):
        out = self.path('session.json')
        transcript = self.path('events.jsonl')
        self.call('protocol_session', seed=3, rounds=20, db_size=30, adversary='force_failure',
                  out=out, transcript=transcript)
        report = orjson.loads(Path(out).read_bytes())['report']
        self.assertEqual((report['accepted'], report['client_aborts'], report['retired']), (0, 20, 20))
        self.assertTrue(Path(transcript).is_file())


class SelfcheckCommandTests(LabCommandTestCase):

    def test_all_checks_pass(self):
        out = self.path('selfcheck.json')
        output = self.call('selfcheck', out=out)
        summary = orjson.loads(Path(out).read_bytes())
        self.assertEqual(summary['failed'], 0)
        self.assertIn('checks passed', output)

    def test_corrupted_mub_fails(self):
        out = self.path('selfcheck.json')
        with self.assertRaises(CommandError) as raised:
            self.call('selfcheck', corrupt_mub=True, out=out)
        self.assertEqual(raised.exception.returncode, 1)
        summary = orjson.loads(Path(out).read_bytes())
        failed = [check['name'] for check in summary['checks'] if not check['passed']]
        self.assertEqual(failed, ['mub8_unbiased'])
        run = ExperimentRun.objects.for_command('selfcheck').get()
        self.assertEqual((run.status, run.exit_code), (RunStatus.FAILED, 1))

    def test_summary_is_deterministic(self):
        first, second = self.path('a.json'), self.path('b.json')
        self.call('selfcheck', out=first)
        self.call('selfcheck', out=second)
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())
