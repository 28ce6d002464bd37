from opvi.models.mixture import MixtureModel, PosteriorGrid, mixture_generate, mixture_posterior_grid
from opvi.models.linreg import LinRegModel, linreg_map_oracle
from opvi.models.bnn import BnnModel
from opvi.models.data import load_csv, synthetic_classification, synthetic_regression

__all__ = [
    "MixtureModel",
    "PosteriorGrid",
    "mixture_generate",
    "mixture_posterior_grid",
    "LinRegModel",
    "linreg_map_oracle",
    "BnnModel",
    "load_csv",
    "synthetic_regression",
    "synthetic_classification",
]
