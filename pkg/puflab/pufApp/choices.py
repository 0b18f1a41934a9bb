from django.db import models


class Scheme(models.TextChoices):  # quantum encoding of response blocks
    BB84    = 'bb84', 'BB84'
    MUB4    = 'mub4', 'MUB-4'
    MUB8    = 'mub8', 'MUB-8'

class CpufKind(models.TextChoices):
    ARBITER     = 'arbiter', 'Arbiter chain'
    XOR_ARBITER = 'xor_arbiter', 'k-XOR arbiter'
    IDEAL       = 'ideal', 'Ideal biased'

class DeviceKind(models.TextChoices):
    CPUF    = 'cpuf', 'Classical PUF'
    HPUF    = 'hpuf', 'Hybrid PUF'
    HLPUF   = 'hlpuf', 'Hybrid locked PUF'

class HalfRole(models.TextChoices):
    FIRST   = 'first', 'First half'
    SECOND  = 'second', 'Second half'

class BasisPrior(models.TextChoices):  # which bases the adversary assumes
    DEVICE  = 'device', 'Bases used by the encoder'
    FULL    = 'full', 'Every basis of the family'

class DatabaseSource(models.TextChoices):
    CLEAN       = 'clean', 'Clean'
    EXTRACTED   = 'extracted', 'Extracted'

class CurveMode(models.TextChoices):  # attack-curve series
    CPUF            = 'cpuf', 'CPUF, clean CRPs'
    HPUF_ADAPTIVE   = 'hpuf_adaptive', 'HPUF, adaptive multi-copy'
    HLPUF_WEAK      = 'hlpuf_weak', 'HLPUF, weak split attack'

class RoundStatus(models.TextChoices):
    ACCEPTED        = 'accepted', 'Accepted'
    CLIENT_ABORT    = 'client_abort', 'Client abort'
    SERVER_REJECT   = 'server_reject', 'Server reject'

class ReuseStatus(models.TextChoices):
    FRESH       = 'fresh', 'Fresh'
    REUSABLE    = 'reusable', 'Reusable'
    RETIRED     = 'retired', 'Retired'

class ChannelAdversaryKind(models.TextChoices):
    PASSTHROUGH         = 'passthrough', 'Passthrough'
    PASSIVE             = 'passive', 'Passive observer'
    INTERCEPT_RESEND    = 'intercept_resend', 'Intercept-resend'
    REPLAY              = 'replay', 'Replay stored second half'
    FORCE_FAILURE       = 'force_failure', 'Force failure'

class RunStatus(models.TextChoices):
    RUNNING     = 'running', 'Running'
    SUCCEEDED   = 'succeeded', 'Succeeded'
    FAILED      = 'failed', 'Failed'
