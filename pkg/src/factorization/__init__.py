"""Factorization: numerical core of online and subsampled matrix factorization."""

from src.factorization.proximal import ElasticNetParams, elastic_net_value, enet_projection, solve_code
from src.factorization.subsampling import Mask, RngState, make_streams, draw_mask
from src.factorization.estimators import EstimatorVariant, SampleCache, compute_batch_code_inputs
from src.factorization.surrogate import SurrogateStats, surrogate_value, empirical_objective
from src.factorization.dict_update import DictionaryState, partial_dictionary_update, init_dictionary
from src.factorization.flops import FlopCounter

__all__ = [
    "ElasticNetParams",
    "elastic_net_value",
    "enet_projection",
    "solve_code",
    "Mask",
    "RngState",
    "make_streams",
    "draw_mask",
    "EstimatorVariant",
    "SampleCache",
    "compute_batch_code_inputs",
    "SurrogateStats",
    "surrogate_value",
    "empirical_objective",
    "DictionaryState",
    "partial_dictionary_update",
    "init_dictionary",
    "FlopCounter"
]
