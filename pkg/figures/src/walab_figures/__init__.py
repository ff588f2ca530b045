"""Figure rendering for walab CSV outputs.

Reads only the documented CSV schemas (per-epoch metrics, line-probe
curves, variance reports) and turns them into SVG figures; it never
touches checkpoints or library internals.
"""

__version__ = "0.1.0"
