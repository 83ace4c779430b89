from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dtrsum.core.config import DEFAULT_SEED

DEFAULT_HOLES = (1, 4, 16, 64)
SMALL_HOLES = (1, 2, 4, 16)
LARGE_HOLES = (16, 32, 64, 128)
DTR_LAYERS = 3
TEMPORAL_KERNEL = 3


class AdversarialLoss(str, Enum):
    """defines the available adversarial objectives."""

    WASSERSTEIN = "wasserstein"
    LEAST_SQUARES = "least_squares"


class ModelConfig(BaseModel):
    """schema for generator and discriminator dimensions."""

    model_config = ConfigDict(extra="forbid")

    feature_dim: int = Field(16, ge=1, description="Frame feature dimension D")
    hidden_dim: int = Field(16, ge=1, description="Generator Bi-LSTM hidden units per direction H")
    encoded_dim: Optional[int] = Field(
        None, ge=1, description="Output dimension of the compact video encoder D_e (defaults to D)"
    )
    disc_hidden_dim: int = Field(8, ge=1, description="Discriminator Bi-LSTM hidden units per direction")
    head_dims: tuple[int, int, int] = Field(
        (512, 256, 128), description="Widths of the three affine layers of the discriminator head"
    )
    holes: tuple[int, int, int, int] = Field(DEFAULT_HOLES, description="Hole sizes of the four DTR units per layer")
    dropout_rate: float = Field(0.5, ge=0.0, lt=1.0, description="Dropout before the score predictor")
    depthwise: bool = Field(False, description="Per-channel DTR taps instead of full channel mixing")
    use_bilstm: bool = Field(True, description="Keep the Bi-LSTM branch of the temporal encoder")
    use_dtr: bool = Field(True, description="Keep the DTR branch of the temporal encoder")
    bn_momentum: float = Field(0.9, ge=0.0, le=1.0, description="Running-statistics momentum")
    bn_eps: float = Field(1e-8, gt=0.0, description="Batch-norm variance floor")

    @field_validator("holes", "head_dims")
    @classmethod
    def positive_entries(cls, v):
        """every hole size and layer width must be positive."""

        if any(entry < 1 for entry in v):
            raise ValueError("entries must be positive integers")
        return v

    @model_validator(mode="after")
    def resolve_dims(self):
        """fill the encoded dimension and require one temporal branch."""

        if self.encoded_dim is None:
            self.encoded_dim = self.feature_dim
        if not (self.use_bilstm or self.use_dtr):
            raise ValueError("at least one of the Bi-LSTM and DTR branches must be enabled")
        return self

    @property
    def concat_dim(self) -> int:
        """width of the per-frame concatenation [f_hat, f_bar] seen by the encoder and scorer."""

        return (self.feature_dim if self.use_dtr else 0) + (2 * self.hidden_dim if self.use_bilstm else 0)


class TrainConfig(BaseModel):
    """schema for the adversarial training schedule."""

    model_config = ConfigDict(extra="forbid")

    lr_g: float = Field(1e-4, gt=0.0, description="Generator learning rate")
    lr_d: float = Field(1e-3, gt=0.0, description="Discriminator learning rate")
    tau: float = Field(0.5, ge=0.0, le=1.0, description="Balance between generated and random pairs")
    shot_len: int = Field(1000, ge=1, description="Frames per sampled training shot")
    shot_overlap: float = Field(0.1, ge=0.0, lt=1.0, description="Overlap between neighbouring shots")
    g_steps_per_iter: int = Field(2, ge=1, description="Generator updates per iteration")
    d_steps_per_iter: int = Field(1, ge=1, description="Discriminator updates per iteration")
    epochs: int = Field(10, ge=0, description="Passes over the training split")
    seed: int = Field(DEFAULT_SEED, ge=0, description="Seed for initialization and sampling")
    adversarial: bool = Field(True, description="Train against the discriminator (False: generator only)")
    random_pair: bool = Field(True, description="Three-player loss (False: drop the random pair)")
    supervised: bool = Field(True, description="Add the supervised frame-level loss")
    adversarial_loss: AdversarialLoss = Field(AdversarialLoss.WASSERSTEIN, description="Adversarial objective")
    grad_clip: Optional[float] = Field(None, gt=0.0, description="Global gradient-norm cap")
    eval_every: int = Field(1, ge=1, description="Evaluate F-measure every this many epochs")

    @model_validator(mode="after")
    def has_objective(self):
        """the generator needs at least one loss term."""

        if not (self.adversarial or self.supervised):
            raise ValueError("training needs the adversarial loss, the supervised loss, or both")
        return self

    @property
    def effective_tau(self) -> float:
        return self.tau if self.random_pair else 1.0


class EvalConfig(BaseModel):
    """schema for the keyshot evaluation protocol."""

    model_config = ConfigDict(extra="forbid")

    budget_fraction: float = Field(0.15, ge=0.0, le=1.0, description="Summary duration budget")
    max_segments: int = Field(20, ge=1, description="Upper bound on KTS segments per video")
    kts_penalty: Optional[float] = Field(
        None, ge=0.0, description="Per-segment penalty (defaults to whole-video scatter / (4 * max_segments))"
    )
    min_keyframes: int = Field(1, ge=1, description="Keyframes a segment needs to become a ground-truth keyshot")


class RunConfig(BaseModel):
    """fully resolved configuration of one command invocation."""

    model_config = ConfigDict(extra="forbid")

    command: str = Field(..., description="Command name")
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    paths: dict[str, str] = Field(default_factory=dict, description="Input and output paths")


class Mode(str, Enum):
    """forward-pass mode: batch statistics and dropout in TRAIN, running statistics in INFER."""

    TRAIN = "train"
    INFER = "infer"
