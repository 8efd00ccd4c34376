"""Network quantification: class prevalence estimation for graph node subsets.

The package combines a randomized reservoir embedder for attributed graphs,
a calibrated linear readout, and a family of aggregative quantifiers that
correct classifier outputs for prior probability shift. Structural baselines
that propagate labels directly over the graph are included for comparison,
along with a sampling protocol for evaluating quantifiers across the full
range of test prevalences.
"""

__version__ = "0.1.0"

from ._backend import backend_name

__all__ = ["__version__", "backend_name"]
