from django.apps import AppConfig


class UnivariateConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'univariate'
    verbose_name = 'Univariate Bounds'
