from django.apps import AppConfig


class EnclosuresConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'enclosures'
    verbose_name = 'Bounding Sets'
