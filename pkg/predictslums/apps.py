from django.apps import AppConfig


class PredictSlumsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'predictslums'
    verbose_name = 'predictSLUMS'
