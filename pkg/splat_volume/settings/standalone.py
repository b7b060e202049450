"""
Settings for running splat_volume on its own through ``manage.py``.

Values from the YAML file named by the ``SPLAT_VOLUME_CFG`` environment
variable are applied as ENV_TOKENS on top of the defaults.
"""
import os
import sys

import yaml

from splat_volume.settings import common, production

SECRET_KEY = os.environ.get("SPLAT_VOLUME_SECRET_KEY", "splat-volume-standalone")
DEBUG = False
USE_TZ = True
INSTALLED_APPS = (
    "splat_volume",
)
DATABASES = {}

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "standard": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "standard"},
    },
    "loggers": {
        "splat_volume": {"handlers": ["console"], "level": os.environ.get("SPLAT_VOLUME_LOG_LEVEL", "INFO")},
    },
}

ENV_TOKENS = {}
_config_path = os.environ.get("SPLAT_VOLUME_CFG")
if _config_path:
    with open(_config_path, encoding="utf-8") as _config_file:
        ENV_TOKENS = yaml.safe_load(_config_file) or {}

common.plugin_settings(sys.modules[__name__])
production.plugin_settings(sys.modules[__name__])
