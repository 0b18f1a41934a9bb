"""
WSGI config for the puflab project.

Only the admin (run ledger browser) is served.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'puflab.settings')

application = get_wsgi_application()
