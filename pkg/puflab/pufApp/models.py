from django.db import models
from django.utils import timezone

from .choices import RunStatus


class ExperimentRunQuerySet(models.QuerySet):
    def succeeded(self):
        return self.filter(status=RunStatus.SUCCEEDED)

    def for_command(self, command):
        return self.filter(command=command)


class ExperimentRunManager(models.Manager):
    def get_queryset(self):
        return ExperimentRunQuerySet(self.model, using=self._db)

    def succeeded(self):
        return self.get_queryset().succeeded()

    def for_command(self, command):
        return self.get_queryset().for_command(command)


class ExperimentRun(models.Model):
    """One invocation of a lab command. Artifacts never depend on this table."""

    command     = models.CharField(max_length=40, db_index=True)
    config_hash = models.CharField(max_length=64)
    seed        = models.BigIntegerField(null=True, blank=True)
    output_path = models.CharField(max_length=255, default="", blank=True)
    status      = models.CharField(
                                    max_length=20,
                                    choices=RunStatus.choices,
                                    default=RunStatus.RUNNING,)
    exit_code   = models.IntegerField(null=True, blank=True)
    summary     = models.CharField(max_length=255, default="", blank=True)
    created     = models.DateTimeField(auto_now_add=True)
    finished    = models.DateTimeField(null=True, blank=True)

    objects     = ExperimentRunManager()    # supports .succeeded() and .for_command()

    class Meta:
        ordering = ['-created']

    def finish(self, status, exit_code, summary=""):
        self.status = status
        self.exit_code = exit_code
        self.summary = summary[:255]
        self.finished = timezone.now()
        self.save(update_fields=['status', 'exit_code', 'summary', 'finished'])

    def __str__(self):
        return f"{self.command} seed={self.seed} [{self.status}]"
