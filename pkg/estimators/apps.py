from django.apps import AppConfig


class EstimatorsConfig(AppConfig):
    name = "estimators"
    verbose_name = "Control-variate estimators"
