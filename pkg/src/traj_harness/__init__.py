"""Within-person depressive-symptom trajectory prediction from screen-use streams."""

__version__ = "0.1.0"

CLASS_NAMES = ("improving", "stable", "worsening")
IMPROVING, STABLE, WORSENING = 0, 1, 2
N_CLASSES = 3
