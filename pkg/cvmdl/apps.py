from django.apps import AppConfig


class CvmdlConfig(AppConfig):
    name = "cvmdl"
    verbose_name = "cvMDL driver"
