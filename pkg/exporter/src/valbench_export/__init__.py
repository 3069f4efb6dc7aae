"""Convert externally produced array dumps into the checkpoint-store layout."""

__version__ = "0.1.0"

from .export import CheckpointSpec, ExportError, export_checkpoint, export_tree, load_export_spec
