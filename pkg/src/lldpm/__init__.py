"""Local level dynamic partition model."""

from .decide import changepoint_metrics, optimal_threshold, summarize, vi_point_estimate
from .model import DataMatrix, InvGamma, ObsHyper, cluster_log_marginal, partition_log_marginal
from .partition import (
    GibbsParams,
    Partition,
    adjusted_rand_index,
    canonicalize,
    enumerate_partitions,
    eppf_log_prob,
    partition_entropy,
    rand_index,
    sample_partition,
    solve_theta,
    variation_of_information,
)
from .psm import PsmPrior, eri_closed_form, psm_forward
from .sampler import SamplerConfig, run_chain, run_two_view
from .synth import gen_ar1, gen_independent, preprocess

__version__ = "0.1.0"
