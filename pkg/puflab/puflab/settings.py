"""
Django settings for the puflab project.

Generated by 'django-admin startproject' using Django 5.2.4.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Optional machine-local overrides (HLPUF_LAB_THREADS, HLPUF_LAB_RECORD_RUNS, ...)
load_dotenv(BASE_DIR / '.env')


# Quick-start development settings - unsuitable for production
# See https://docs.djangoproject.com/en/5.2/howto/deployment/checklist/

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    'DJANGO_SECRET_KEY',
    'django-insecure-7v0x^hl$pu#f-lab-q3n@c9m!b84k2r(z8w1e%t5y6u&i0o',
)

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.environ.get('DJANGO_DEBUG', '1') == '1'

ALLOWED_HOSTS = [
    '127.0.0.1',
    'localhost',
]


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'pufApp',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'puflab.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'puflab.wsgi.application'


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases
# Only the experiment run ledger lives here; CSV/JSON artifacts never depend on it.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Password validation
# https://docs.djangoproject.com/en/5.2/ref/settings/#auth-password-validators

AUTH_PASSWORD_VALIDATORS = [
    {
        'NAME': 'django.contrib.auth.password_validation.UserAttributeSimilarityValidator',
    },
    {
        'NAME': 'django.contrib.auth.password_validation.MinimumLengthValidator',
    },
]


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Static files (CSS, JavaScript, Images)
# https://docs.djangoproject.com/en/5.2/howto/static-files/

STATIC_URL = 'static/'

# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
# Experiment progress is INFO, per-round detail DEBUG.

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
    'loggers': {
        'pufApp': {
            'handlers': ['console'],
            'level': os.environ.get('HLPUF_LAB_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}


# Lab defaults. Config files (YAML) override these, command-line flags override both.

HLPUF_LAB = {
    'VERSION': '0.1',
    'RECORD_RUNS': os.environ.get('HLPUF_LAB_RECORD_RUNS', '1') == '1',
    'TOLERANCE': 1e-9,
    # Fraction of second-half blocks the server may find mismatched and still accept.
    'VERIFY_EPSILON': 0.0,
    'EXPERIMENT': {
        'cpuf_kind': 'xor_arbiter',
        'n': 32,
        'k': 2,
        'm': 2,
        'scheme': 'bb84',
        'p': 0.5,
        'q_grid': [0, 1000, 2000, 5000, 10000, 20000, 50000],
        'eps_grid': [0.0, 0.1, 0.2, 0.3],
        'trials': 1000,
        'seeds': 5,
        'test_size': 10000,
        'copies': 10,
        'rounds': 100,
        'db_size': 200,
        'reuse_cap': None,
        'adversary': 'passthrough',
        'flip_rate': 0.0,
        'threads': int(os.environ.get('HLPUF_LAB_THREADS', '1')),
    },
    'LR': {
        'learning_rate': 0.01,
        'epochs': 200,
        'batch_size': 256,
        'restarts': 5,
        'validation_fraction': 0.1,
        'stop_validation_accuracy': 0.995,
    },
}
