from django.db import models
from django.utils.text import slugify


class VerificationRun(models.Model):
    """
    A recorded `verify` run
    """
    EXIT_CODE_CHOICES = [
        (0, 'Verified'),
        (1, 'Falsified candidate'),
        (2, 'Unknown or error'),
    ]

    benchmark = models.CharField(max_length=100)
    slug = models.SlugField(max_length=100, blank=True)
    mode = models.CharField(max_length=20, help_text='concrete or symbolic(w)')
    exit_code = models.PositiveSmallIntegerField(choices=EXIT_CODE_CHOICES)
    verdicts = models.JSONField(default=list)
    final_box = models.JSONField(default=list)
    final_volume = models.FloatField(null=True, blank=True)
    wall_time_s = models.FloatField(default=0.0)
    results_path = models.CharField(max_length=500, blank=True)
    error = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'verification_runs'
        ordering = ['-created_at']

    def save(self, *args, **kwargs):
        if not self.slug:
            self.slug = slugify(self.benchmark)
        super().save(*args, **kwargs)

    def __str__(self):
        return f'{self.benchmark} ({self.mode}): exit {self.exit_code}'

    @property
    def is_verified(self):
        return self.exit_code == 0
