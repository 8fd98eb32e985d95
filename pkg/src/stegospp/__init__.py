"""Post-processing of ternary-STC stego images that lowers residual distance to the cover."""
from ._backend import BACKEND
from .analytics import (batch_report, locality_ratio, modification_density,
                        opposition_ratio, pearson, post_modification_rate)
from .costs import cost_map, hill_cost, simulate_embedding, uerd_cost
from .filters import FilterSet, build_filter_set, learn_base_filter, learn_filter_set
from .imaging import JpegCoeffGrid, load_image, load_jcg, load_pgm, save_image, save_jcg, save_pgm
from .residual import (incremental_update_jpeg, incremental_update_spatial,
                       manhattan_distance, residual_stack)
from .spp import SppConfig, SppResult, run_spp, spp_fast, spp_fast_jpeg, spp_general
from .stc import StcCode, TernaryKey, check_robustness, ternary_embed, ternary_extract

__version__ = "0.1.0"
