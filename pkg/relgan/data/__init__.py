from .synthetic import SyntheticTaskSpec, Sample, generate_sample, TEXTURES, BACKGROUNDS
from .png_io import load_png, save_png, load_png_dir, load_mask, save_mask
from .datasets import TranslationDataset, synthetic_dataset, make_dataset, load_dataset_dir, read_task_spec
from .batcher import Batch, Batcher
