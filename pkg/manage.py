#!/usr/bin/env python
"""
Command line entry point: ``python manage.py <command>``.

Runs against ``splat_volume.settings.standalone`` unless
``DJANGO_SETTINGS_MODULE`` says otherwise.
"""

import os
import sys

if __name__ == "__main__":
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "splat_volume.settings.standalone")
    sys.path.append(os.path.abspath(os.path.dirname(__file__)))
    try:
        from django.core.management import execute_from_command_line
    except ImportError as import_error:
        raise ImportError(
            "Couldn't import Django. Install the requirements with "
            "`pip install -r requirements/base.txt` inside your virtualenv."
        ) from import_error
    execute_from_command_line(sys.argv)
