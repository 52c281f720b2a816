from pathlib import Path
from typing import Any, Dict

import django
from django.conf import settings as django_settings
from environ import Env

env = Env()

# Logging
# region
LOG_LEVEL: str = env.str('ILRO_LOG_LEVEL', 'INFO')

LOGGING: Dict[str, Any] = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console', ],
        'level': LOG_LEVEL,
    },
}
# endregion

# Workers
# region
JOBS: int = env.int('ILRO_JOBS', 1)
SIM_BATCH: int = env.int('ILRO_SIM_BATCH', 16)
# endregion

# Output
# region
OUTPUT_DIR: Path = Path(env.str('ILRO_OUTPUT_DIR', 'results'))
CSV_DIGITS: int = 12
WAVEFORM_DIGITS: int = 17
# endregion

# Django
# region
# only django.forms is used: no apps, no database, no translations
if not django_settings.configured:
    django_settings.configure(USE_I18N=False, LOGGING_CONFIG=None, INSTALLED_APPS=[])
    django.setup()
# endregion
