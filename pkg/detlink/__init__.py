from loguru import logger

from .affinity import *
from .assign import *
from .fusion import *
from .ingest import *
from .model import *
from .tracking import *
from .writers import *

# Library use is silent; the command line enables logging.
logger.disable(__name__)
