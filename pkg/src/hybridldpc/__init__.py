"""Hybrid nonbinary LDPC codes over nested binary symbol groups.

Subpackages cover the full pipeline: group arithmetic and symbol maps
(:mod:`~hybridldpc.groups`), degree distribution bookkeeping
(:mod:`~hybridldpc.ensembles`), progressive edge growth construction
(:mod:`~hybridldpc.construction`), channel models (:mod:`~hybridldpc.channel`),
encoding and belief propagation decoding (:mod:`~hybridldpc.codec`),
density evolution under the Gaussian approximation
(:mod:`~hybridldpc.density_evolution`), degree distribution optimization
(:mod:`~hybridldpc.optimization`), and the Monte Carlo error-rate harness
(:mod:`~hybridldpc.simulation`).
"""

from hybridldpc.groups import SymbolMap, identity_map, random_injective_map
from hybridldpc.ensembles import Ensemble

__version__ = "0.1.0"

__all__ = [
    "SymbolMap",
    "identity_map",
    "random_injective_map",
    "Ensemble",
    "__version__",
]
