from django.db import models
from django.utils import timezone
from django.utils.translation import gettext_lazy as _


class PipelineRun(models.Model):
    """Ledger entry for one pipeline invocation."""

    STATUS_RUNNING = 'running'
    STATUS_COMPLETE = 'complete'
    STATUS_INCOMPLETE = 'incomplete'
    STATUS_CHOICES = [
        (STATUS_RUNNING, _('Running')),
        (STATUS_COMPLETE, _('Complete')),
        (STATUS_INCOMPLETE, _('Incomplete')),
    ]

    output_dir = models.CharField(max_length=1024)
    seed = models.BigIntegerField(default=0)
    config = models.JSONField(default=dict)
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default=STATUS_RUNNING)
    failed_stage = models.CharField(max_length=64, blank=True)
    error = models.TextField(blank=True)
    started_at = models.DateTimeField(default=timezone.now)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']
        verbose_name = _('Pipeline Run')
        verbose_name_plural = _('Pipeline Runs')

    def __str__(self):
        return f'{self.output_dir} ({self.status})'

    def mark_complete(self):
        self.status = self.STATUS_COMPLETE
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'finished_at'])

    def mark_failed(self, stage, error):
        self.status = self.STATUS_INCOMPLETE
        self.failed_stage = stage or ''
        self.error = str(error)
        self.finished_at = timezone.now()
        self.save(update_fields=['status', 'failed_stage', 'error', 'finished_at'])
