"""Location inference from elevation profiles of fitness-tracker routes."""

__version__ = "0.1.0"
