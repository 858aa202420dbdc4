"""Orthogonal polynomials on Brownian path space.

Exact word algebra and expected-signature inner products live in
:mod:`pathortho.words`, :mod:`pathortho.expected` and :mod:`pathortho.hoffman`;
orthogonal bases in :mod:`pathortho.ortho`; sampled paths and features in
:mod:`pathortho.paths`; Monte Carlo experiments in :mod:`pathortho.expansion`;
the graded recurrence audit in :mod:`pathortho.recurrence`; and the pairing
ansatz certificate in :mod:`pathortho.naturality`.
"""

__version__ = "0.1.0"

from .expected import InnerProduct, inner_fawcett, inner_ito, inner_strat
from .hoffman import hoffman_exp, hoffman_log, strat_to_ito_map
from .ortho import OrthoBasis, block_orthogonalize, ito_basis, lift_pattern, stratonovich_basis
from .words import TensorPoly, quasi_shuffle, shuffle, word, word_str

__all__ = [
    "InnerProduct",
    "OrthoBasis",
    "TensorPoly",
    "block_orthogonalize",
    "hoffman_exp",
    "hoffman_log",
    "inner_fawcett",
    "inner_ito",
    "inner_strat",
    "ito_basis",
    "lift_pattern",
    "quasi_shuffle",
    "shuffle",
    "stratonovich_basis",
    "strat_to_ito_map",
    "word",
    "word_str",
]
