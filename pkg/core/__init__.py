from .graph import AdjacencyMatrix, load_edge_list, save_edge_list, largest_component
from .dcbm import (
    DcbmParams, LowerBoundModel, build_lower_bound_model, build_omega, experiment_preset,
    hph_spectrum, sample_adjacency, simulate_network, snr_report,
)
from .spectral import EigenPairs, RatioMatrix, score_ratio_matrix, top_eigenpairs
from .clustering import ClusterAssignment, kmeans, nsp_check, pruning_distances, rss_delta
from .gof import (
    GofStatistics, RefitModel, bias_correction, psi_statistic, q_statistic,
    quadrilateral_count, refit,
)
from .stgof import (
    BootstrapNull, StgofResult, bootstrap_null, estimate_k, estimate_k_star, psi_profile,
)
from .report import ReportGenerator

__all__ = [
    'AdjacencyMatrix', 'load_edge_list', 'save_edge_list', 'largest_component',
    'DcbmParams', 'LowerBoundModel', 'build_lower_bound_model', 'build_omega',
    'experiment_preset', 'hph_spectrum', 'sample_adjacency', 'simulate_network', 'snr_report',
    'EigenPairs', 'RatioMatrix', 'score_ratio_matrix', 'top_eigenpairs',
    'ClusterAssignment', 'kmeans', 'nsp_check', 'pruning_distances', 'rss_delta',
    'GofStatistics', 'RefitModel', 'bias_correction', 'psi_statistic', 'q_statistic',
    'quadrilateral_count', 'refit',
    'BootstrapNull', 'StgofResult', 'bootstrap_null', 'estimate_k', 'estimate_k_star',
    'psi_profile', 'ReportGenerator',
]
