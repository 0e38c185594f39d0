import importlib.resources
import json
from typing import Any, Dict


def load_config(name: str) -> Dict[str, Any]:
    """Load a default config file by its name.

    Args:
        name: name of the config to load, e.g. "relgan_default".
    """

    with importlib.resources.files("relgan.config").joinpath(f"{name}.json").open("r") as f:
        config = json.load(f)

    return config
