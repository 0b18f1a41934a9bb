from django.apps import AppConfig


class PufappConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'pufApp'
    verbose_name = 'Hybrid locked PUF lab'
