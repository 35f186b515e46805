"""
Django settings for the teamtrack_platform project.

The project has no web surface: Django provides the settings layer, the
management-command CLI and the test runner for the tracking library and the
scenario simulator.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Not used for signing anything, Django only requires it to be set.
SECRET_KEY = os.getenv('SECRET_KEY', 'teamtrack-insecure-0b5n!x3v7k2q9w4e8r1t6y')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    # Third-party apps
    'rest_framework',

    # Local apps
    'geometry',
    'registration',
    'tracking',
    'network',
    'simulation',
    'metrics',
    'experiments',
]

# No models are persisted; run logs are CSV directories.
DATABASES = {}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Logging
# https://docs.djangoproject.com/en/4.2/topics/logging/

TEAMTRACK_LOG_LEVEL = os.getenv('TEAMTRACK_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': TEAMTRACK_LOG_LEVEL,
            'propagate': False,
        }
        for app in ('geometry', 'registration', 'tracking', 'network',
                    'simulation', 'metrics', 'experiments')
    },
}


# Simulator / evaluation settings
TEAMTRACK_OUTPUT_DIR = Path(os.getenv('TEAMTRACK_OUTPUT_DIR', BASE_DIR / 'runs'))
TEAMTRACK_SWEEP_WORKERS = int(os.getenv('TEAMTRACK_SWEEP_WORKERS', '1'))
TEAMTRACK_D_MATCH = float(os.getenv('TEAMTRACK_D_MATCH', '1.0'))
TEAMTRACK_MOTA_WINDOW_S = float(os.getenv('TEAMTRACK_MOTA_WINDOW_S', '10.0'))
