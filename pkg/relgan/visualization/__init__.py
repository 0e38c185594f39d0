from .grids import diff_heatmap, translation_grid, save_grid
from .curves import plot_loss_curves, axes_metadata_path
