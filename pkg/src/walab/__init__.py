"""walab: a desk-scale laboratory for weight-averaged SGD training.

Training controllers based on running weight averages (single, chained,
and periodic), the learning-rate schedules they ride on, a self-contained
float64 neural-network stack, a noisy-quadratic testbed for the
variance-reduction claim, a loss-landscape line probe, and a CLI harness
for reproducible experiments.
"""

__version__ = "0.1.0"
