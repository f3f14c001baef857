from django.apps import AppConfig


class DjcalibConfig(AppConfig):
    name = "djcalib"
    label = "calibration"
    verbose_name = "Django Calibration"
