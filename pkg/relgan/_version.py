from importlib.metadata import version
from importlib.metadata import PackageNotFoundError

try:
    __version__ = version("relgan")
except PackageNotFoundError:
    # not installed
    __version__ = "dev"
