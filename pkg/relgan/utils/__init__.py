from . import fs
