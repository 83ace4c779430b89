import numpy as np

from dtrsum.models.base import ParameterGroup
from dtrsum.models.temporal import BiLstmParams, LinearParams
from dtrsum.schemas.config import ModelConfig


class DiscriminatorParams(ParameterGroup):
    """
    parameters of the three-input discriminator.

    video_encoder reads the raw features (width D), summary_encoder reads
    the compact representation (width D_e). the head maps the concatenated
    pooled encodings through the configured widths down to one score.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator, prefix: str = "discriminator"):
        super().__init__(prefix)
        self.config = config
        hidden = config.disc_hidden_dim
        self.video_encoder = BiLstmParams(self._path("video_encoder"), config.feature_dim, hidden, rng)
        self.summary_encoder = BiLstmParams(self._path("summary_encoder"), config.encoded_dim, hidden, rng)
        widths = [4 * hidden, *config.head_dims, 1]
        self.head = [
            LinearParams(self._path(f"head{k}"), widths[k], widths[k + 1], rng)
            for k in range(len(widths) - 1)
        ]
