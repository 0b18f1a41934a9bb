"""Experiment configuration: settings defaults < YAML file < command-line flags, validated by a form."""
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml
from django import forms
from django.conf import settings

from .choices import ChannelAdversaryKind, CpufKind, Scheme
from .exceptions import ConfigError
from .hybrid import encoding_scheme
from .utils.artifacts import config_hash

COMMANDS = ['attack_curve', 'bounds', 'protocol_session', 'selfcheck']
SEEDED_COMMANDS = {'attack_curve', 'protocol_session'}


class _ListField(forms.Field):
    """Accepts a YAML list or a comma-separated string."""
    item_type = int

    def to_python(self, value):
        if value in (None, '', []):
            return []
        if isinstance(value, str):
            value = [part for part in value.replace(' ', '').split(',') if part]
        try:
            return [self.item_type(item) for item in value]
        except (TypeError, ValueError):
            raise forms.ValidationError(f"expected a list of {self.item_type.__name__} values")


class IntegerListField(_ListField):
    item_type = int


class FloatListField(_ListField):
    item_type = float


class ExperimentConfigForm(forms.Form):
    command     = forms.ChoiceField(choices=[(name, name) for name in COMMANDS])
    seed        = forms.IntegerField(required=False, min_value=0)
    cpuf_kind   = forms.ChoiceField(choices=CpufKind.choices)
    n           = forms.IntegerField(min_value=1, max_value=256)
    k           = forms.IntegerField(min_value=1, max_value=8)
    m           = forms.IntegerField(min_value=1, max_value=128)
    scheme      = forms.ChoiceField(choices=Scheme.choices)
    p           = forms.FloatField(min_value=0.5, max_value=1.0)
    q_grid      = IntegerListField()
    eps_grid    = FloatListField(required=False)
    trials      = forms.IntegerField(min_value=1)
    seeds       = forms.IntegerField(min_value=1)
    test_size   = forms.IntegerField(min_value=1)
    copies      = forms.IntegerField(min_value=2)
    rounds      = forms.IntegerField(min_value=1)
    db_size     = forms.IntegerField(min_value=1)
    reuse_cap   = forms.IntegerField(required=False, min_value=1)   # issues per challenge; empty = unlimited
    adversary   = forms.ChoiceField(choices=ChannelAdversaryKind.choices)
    flip_rate   = forms.FloatField(min_value=0.0, max_value=0.5)
    threads     = forms.IntegerField(min_value=1)
    out         = forms.CharField(required=False)
    timing      = forms.BooleanField(required=False)

    def clean_q_grid(self):
        grid = self.cleaned_data['q_grid']
        if any(q < 0 for q in grid):
            raise forms.ValidationError("query counts must be non-negative")
        if any(later <= earlier for earlier, later in zip(grid, grid[1:])):
            raise forms.ValidationError("q grid must be strictly increasing")
        return grid

    def clean_eps_grid(self):
        grid = self.cleaned_data['eps_grid']
        if any(not 0.0 <= eps <= 1.0 for eps in grid):
            raise forms.ValidationError("eps values must lie in [0, 1]")
        return grid

    def clean(self):
        cleaned = super().clean()
        command = cleaned.get('command')
        scheme = cleaned.get('scheme')
        m = cleaned.get('m')

        if command in SEEDED_COMMANDS and cleaned.get('seed') is None:
            raise forms.ValidationError(f"{command} needs --seed")
        if scheme and m:
            bits = encoding_scheme(scheme).bits_per_block
            if (2 * m) % bits:
                raise forms.ValidationError(
                    f"m={m} qubits per half do not fit {scheme} blocks of {bits} bits")
        if command == 'attack_curve' and cleaned.get('cpuf_kind') == CpufKind.IDEAL:
            raise forms.ValidationError("the LR attack models arbiter chains, not the ideal PUF")

        return cleaned


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int
    cpuf_kind: str
    n: int
    k: int
    m: int
    scheme: str
    p: float
    q_grid: tuple
    eps_grid: tuple
    trials: int
    seeds: int
    test_size: int
    copies: int
    rounds: int
    db_size: int
    reuse_cap: int
    adversary: str
    flip_rate: float
    threads: int
    out: str
    timing: bool
    lr: dict = field(default_factory=dict)

    def as_dict(self):
        values = asdict(self)
        values['q_grid'] = list(self.q_grid)
        values['eps_grid'] = list(self.eps_grid)
        return values

    @property
    def digest(self):
        return self.digest_with()

    def digest_with(self, **extra):
        """Hash of everything that shapes the artifacts (not where they are written)."""
        values = self.as_dict()
        values.pop('out')
        values.pop('threads')
        values.update(extra)
        return config_hash(values)


def read_config_file(path):
    path = Path(path)
    try:
        loaded = yaml.safe_load(path.read_text(encoding='utf-8'))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return loaded


def build_config(command, config_file=None, **overrides):
    """Layer defaults, file and flags, validate, and freeze."""
    values = dict(settings.HLPUF_LAB['EXPERIMENT'])
    lr = dict(settings.HLPUF_LAB['LR'])
    if config_file:
        loaded = read_config_file(config_file)
        lr.update(loaded.pop('lr', None) or {})
        values.update(loaded)
    values.update({key: value for key, value in overrides.items() if value is not None})
    values['command'] = command

    unknown_lr = set(lr) - set(settings.HLPUF_LAB['LR'])
    if unknown_lr:
        raise ConfigError(f"unknown LR settings: {', '.join(sorted(unknown_lr))}")
    known = {item.name for item in fields(ExperimentConfig)} - {'lr'}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    form = ExperimentConfigForm(data=values)
    if not form.is_valid():
        problems = '; '.join(f"{name}: {' '.join(errors)}" for name, errors in form.errors.items())
        raise ConfigError(problems)
    cleaned = dict(form.cleaned_data)
    cleaned['seed'] = cleaned['seed'] if cleaned['seed'] is not None else 0
    cleaned['q_grid'] = tuple(cleaned['q_grid'])
    cleaned['eps_grid'] = tuple(cleaned['eps_grid'])
    cleaned['out'] = cleaned['out'] or ''
    return ExperimentConfig(lr=lr, **cleaned)
