"""
WSGI config for the polyverify run ledger API.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'polyverify.settings')

application = get_wsgi_application()
