"""Rate optimizers for energy-harvesting MIMO-OFDM amplify-and-forward relays."""

from .channel import (
    ChannelRealization,
    DecompositionError,
    EigenChannel,
    Geometry,
    Pairing,
    SystemConfig,
    dbm_to_watt,
    decompose,
    generate_channel,
    noise_variance,
)
from .tsr import TsrOptimizerSettings, TsrSolution, pair_subchannels, search_alpha
from .psr import PsrSettings, PsrSolution, optimize_psr

__version__ = "0.1.0"
