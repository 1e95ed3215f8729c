"""Tools for outlining polygonal objects on images: a deterministic drawing
environment, its reward engine, supervision-data generation, replay queues,
COCO ingestion, evaluation and a binary interchange format."""

__version__ = "0.1.0"
