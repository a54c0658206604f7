"""Toolkit for pointer-authentication based kernel CFI.

Subpackages:

* :mod:`pacfi.asm` - AArch64 listing ingestion and instruction classes
* :mod:`pacfi.cfg` - per-function control-flow graphs
* :mod:`pacfi.validator` - PA security-invariant checks over listings
* :mod:`pacfi.pa` - pointer-authentication model and kernel schemes
* :mod:`pacfi.analyzer` - context analyzer (diversity score, precision)
* :mod:`pacfi.sim` - attack simulator
"""

__version__ = "0.1.0"
SCHEMA_VERSION = 1
