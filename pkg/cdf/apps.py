from django.apps import AppConfig


class CdfConfig(AppConfig):
    name = "cdf"
    verbose_name = "CDF representations"
