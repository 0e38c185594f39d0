from .data import make_dataset_command
from .train import train_command
from .inference import translate_command, eval_command
from .verify import gradcheck_command
from .compare import compare_command
from .main import app
