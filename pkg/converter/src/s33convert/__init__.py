"""s33convert: raw vehicle-drive sensor logs -> beambench dataset format.

Standalone by design: it speaks to the training pipeline only through the
manifest.json/.bmt byte formats and the shared run-config JSON, never
through its Python API.
"""

__version__ = "0.1.0"
