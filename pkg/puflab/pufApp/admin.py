from django.contrib import admin
from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('command', 'seed', 'status', 'exit_code', 'created', 'finished')
    list_filter = ('command', 'status')
    search_fields = ('config_hash', 'output_path')
