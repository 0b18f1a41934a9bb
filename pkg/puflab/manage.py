#!/usr/bin/env python
"""Command-line entry point of the HLPUF lab.

Experiments run as management commands:

    python manage.py selfcheck
    python manage.py bounds --seed 1 --out bounds.csv
    python manage.py attack_curve --seed 1 --out curve.csv
    python manage.py protocol_session --seed 1 --out session.json
"""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'puflab.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Is it installed in the active "
            "environment? See requirements.txt."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
