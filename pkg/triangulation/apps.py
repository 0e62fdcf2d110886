from django.apps import AppConfig


class TriangulationConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'triangulation'
    verbose_name = 'Grid Triangulation'
