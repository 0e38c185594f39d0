from ._load import load_config

from ._loader import load_train_config
from ._loader import load_task_spec
from ._loader import train_config_from_dict
from ._loader import task_spec_from_dict
from ._loader import json_pointer
