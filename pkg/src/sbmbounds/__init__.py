"""Information and MMSE bounds for degree-balanced stochastic block models
with covariate side information and multiple correlated networks, together
with belief-propagation and spectral inference pipelines and an exact
enumeration oracle for tiny instances."""

from .bp import BpConfig, NodeEstimates, compute_mse, run_bp
from .channel import (ChannelMoments, channel_moments,
                      channel_moments_quadrature, posterior_weights)
from .labels import (ChannelSpec, CommunityModel, CovariateSample, LabelSample,
                     model_from_config, sample_covariates, sample_labels,
                     whiten)
from .netgen import (AdjacencyList, GaussianEquivObservation, edge_probability,
                     generate_gaussian_equiv, generate_network)
from .oracle import ExactPosterior, exact_mutual_information_mc, exact_posterior
from .potential import (BoundResult, MinimizeOptions, NetworkLayer,
                        NetworkSpec, evaluate_potential, minimize_potential,
                        mmse_bound)
from .spectral import (SpectralEmbedding, average_networks, gmm_label,
                       spectral_embed)

__all__ = [
    "AdjacencyList", "BoundResult", "BpConfig", "ChannelMoments",
    "ChannelSpec", "CommunityModel", "CovariateSample",
    "ExactPosterior", "GaussianEquivObservation", "LabelSample",
    "MinimizeOptions", "NetworkLayer", "NetworkSpec", "NodeEstimates",
    "SpectralEmbedding", "average_networks", "channel_moments",
    "channel_moments_quadrature", "compute_mse", "edge_probability",
    "evaluate_potential", "exact_mutual_information_mc", "exact_posterior",
    "generate_gaussian_equiv", "generate_network", "gmm_label",
    "minimize_potential", "mmse_bound", "model_from_config",
    "posterior_weights", "run_bp", "sample_covariates", "sample_labels",
    "spectral_embed", "whiten",
]

__version__ = "0.1.0"
