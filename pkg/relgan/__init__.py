from ._version import __version__

from .config import load_config

from . import utils
from . import autodiff
from . import nn
from . import data
from . import trainer
