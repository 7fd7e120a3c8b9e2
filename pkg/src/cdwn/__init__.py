"""Backhaul-limited cached dense wireless networks.

Placement, MDS cache planning, cache-assisted multihop relaying,
cache-induced cooperative MIMO, closed-form throughput analysis and a
fluid-flow Monte Carlo simulator.
"""
from .analysis import (cooperation_gain, maximize_split, per_bs_throughput_A,
                       per_bs_throughput_B, phi, psi, taqgen, throughput_terms)
from .caching import (build_cache_plan, min_cache_regime, optimal_replication,
                      uniform_replication, zipf)
from .channel import (ChannelParams, PhaseDraw, aggregate_capacity_ub_cdwn,
                      aggregate_capacity_ub_udwn, capacity_bound_f, lattice_interference_sum)
from .comimo import comimo_rate_bounds, form_clusters, schedule_users
from .multihop import color_frequencies, select_source_set, trace_route
from .simulator import SimConfig, SimResult, fit_scaling_exponent, simulate, sweep
from .topology import (PlacementParams, generate_perturbed_grid, generate_regular,
                       validate_placement)

__version__ = "0.1.0"
