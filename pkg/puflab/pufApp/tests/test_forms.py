import tempfile
from pathlib import Path

from django import forms
from django.test import SimpleTestCase

from pufApp.exceptions import ConfigError
from pufApp.forms import FloatListField, IntegerListField, build_config, read_config_file


class ListFieldTests(SimpleTestCase):

    def test_comma_separated_strings(self):
        self.assertEqual(IntegerListField().clean('0, 10,20'), [0, 10, 20])
        self.assertEqual(FloatListField().clean('0.5,1'), [0.5, 1.0])

    def test_yaml_lists(self):
        self.assertEqual(IntegerListField().clean([1, 2]), [1, 2])

    def test_bad_items(self):
        with self.assertRaises(forms.ValidationError):
            IntegerListField().clean('1,two')


class BuildConfigTests(SimpleTestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def _yaml(self, text):
        path = Path(self.directory.name) / 'lab.yaml'
        path.write_text(text, encoding='utf-8')
        return path

    def test_settings_defaults(self):
        config = build_config('bounds')
        self.assertEqual((config.n, config.k, config.m, config.scheme), (32, 2, 2, 'bb84'))
        self.assertEqual(config.seed, 0)
        self.assertIsNone(config.reuse_cap)
        self.assertEqual(config.lr['epochs'], 200)

    def test_file_then_flags(self):
        path = self._yaml("n: 16\nk: 1\nlr:\n  epochs: 5\n")
        config = build_config('attack_curve', path, seed=3, n=24)
        self.assertEqual((config.n, config.k, config.seed), (24, 1, 3))
        self.assertEqual(config.lr['epochs'], 5)
        self.assertEqual(config.lr['restarts'], 5)

    def test_seeded_commands_need_a_seed(self):
        with self.assertRaises(ConfigError):
            build_config('attack_curve')
        with self.assertRaises(ConfigError):
            build_config('protocol_session')

    def test_unknown_keys(self):
        with self.assertRaises(ConfigError):
            build_config('bounds', self._yaml("colour: blue\n"))
        with self.assertRaises(ConfigError):
            build_config('bounds', self._yaml("lr:\n  momentum: 0.9\n"))

    def test_grid_validation(self):
        with self.assertRaises(ConfigError):
            build_config('bounds', q_grid='10,5')
        with self.assertRaises(ConfigError):
            build_config('bounds', eps_grid='0,1.5')

    def test_block_arithmetic(self):
        with self.assertRaises(ConfigError):
            build_config('bounds', scheme='mub8', m=2)
        self.assertEqual(build_config('bounds', scheme='mub8', m=3).m, 3)

    def test_attack_curve_rejects_the_ideal_puf(self):
        with self.assertRaises(ConfigError):
            build_config('attack_curve', seed=1, cpuf_kind='ideal')

    def test_digest_ignores_output_and_threads(self):
        first = build_config('bounds', out='a.csv', threads=1)
        second = build_config('bounds', out='b.csv', threads=4)
        self.assertEqual(first.digest, second.digest)
        self.assertNotEqual(first.digest, build_config('bounds', m=4).digest)
        self.assertNotEqual(first.digest, first.digest_with(p_classical=0.5))

    def test_unreadable_files(self):
        with self.assertRaises(ConfigError):
            read_config_file(Path(self.directory.name) / 'missing.yaml')
        with self.assertRaises(ConfigError):
            read_config_file(self._yaml("n: [1, 2\n"))
        with self.assertRaises(ConfigError):
            read_config_file(self._yaml("- 1\n- 2\n"))
        self.assertEqual(read_config_file(self._yaml("")), {})

    def test_reuse_cap_is_at_least_one_issue(self):
        with self.assertRaises(ConfigError):
            build_config('protocol_session', seed=1, reuse_cap=0)
        self.assertEqual(build_config('protocol_session', seed=1, reuse_cap=1).reuse_cap, 1)
        self.assertIsNone(build_config('protocol_session', seed=1).reuse_cap)
