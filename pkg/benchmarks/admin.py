from django.contrib import admin
from .models import VerificationRun


@admin.register(VerificationRun)
class VerificationRunAdmin(admin.ModelAdmin):
    list_display = ['benchmark', 'mode', 'exit_code', 'final_volume', 'wall_time_s', 'created_at']
    list_filter = ['exit_code', 'mode', 'benchmark', 'created_at']
    search_fields = ['benchmark', 'error']
    readonly_fields = ['created_at']
    date_hierarchy = 'created_at'

    fieldsets = (
        ('Run', {
            'fields': ('benchmark', 'slug', 'mode', 'exit_code', 'error')
        }),
        ('Results', {
            'fields': ('verdicts', 'final_box', 'final_volume', 'results_path')
        }),
        ('Timing', {
            'fields': ('wall_time_s', 'created_at')
        }),
    )
