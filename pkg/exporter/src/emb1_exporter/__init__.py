"""Frozen-backbone embedding exporter emitting EMB1 files."""

from .backbones import BACKBONE_INFO, SUPPORTED, BackboneError, load_backbone
from .export import ExportError, ExportJob, export_embeddings, scan_images, verify_export

__version__ = "0.1.0"
