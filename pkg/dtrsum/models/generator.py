import numpy as np

from dtrsum.models.base import ParameterGroup
from dtrsum.models.temporal import BiLstmParams, DtrNetworkParams, LinearParams
from dtrsum.schemas.config import DTR_LAYERS, ModelConfig


class GeneratorParams(ParameterGroup):
    """
    parameters of the summary generator.

    the temporal encoder concatenates the DTR branch (dtr, width D) and the
    Bi-LSTM branch (bilstm, width 2H) per frame; encoder maps that to the
    compact video representation and scorer to one importance score.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator, prefix: str = "generator"):
        super().__init__(prefix)
        self.config = config
        self.dtr = (
            DtrNetworkParams(
                self._path("dtr"),
                config.holes,
                config.feature_dim,
                DTR_LAYERS,
                rng,
                depthwise=config.depthwise,
                momentum=config.bn_momentum,
                eps=config.bn_eps,
            )
            if config.use_dtr
            else None
        )
        self.bilstm = (
            BiLstmParams(self._path("bilstm"), config.feature_dim, config.hidden_dim, rng)
            if config.use_bilstm
            else None
        )
        self.encoder = LinearParams(self._path("encoder"), config.concat_dim, config.encoded_dim, rng)
        self.scorer = LinearParams(self._path("scorer"), config.concat_dim, 1, rng)
