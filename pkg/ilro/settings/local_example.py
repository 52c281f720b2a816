from .main import *

LOG_LEVEL: str = 'DEBUG'
LOGGING['root']['level'] = LOG_LEVEL

# Workers
# region
JOBS: int = 0
SIM_BATCH: int = 8
# endregion
