import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'teamtrack_platform.settings')
django.setup()
