from typing import Optional

from pydantic import BaseModel, Field


class LossReport(BaseModel):
    """losses and discriminator scores of one training iteration."""

    iteration: int = Field(..., ge=0)
    epoch: int = Field(..., ge=0)
    video_id: str
    loss_d: Optional[float] = Field(None, description="Discriminator loss L_D")
    loss_g_adv: Optional[float] = Field(None, description="Generator adversarial loss")
    loss_summ: Optional[float] = Field(None, description="Supervised frame-level loss")
    d_g: Optional[float] = Field(None, description="Score of the ground-truth pair")
    d_s: Optional[float] = Field(None, description="Score of the generated pair")
    d_r: Optional[float] = Field(None, description="Score of the random pair")
    val_f: Optional[float] = Field(None, description="Validation F-measure, on evaluation iterations")


class EpochSummary(BaseModel):
    """per-epoch aggregates of the iteration reports."""

    epoch: int = Field(..., ge=0)
    mean_loss_d: Optional[float] = None
    mean_loss_g_adv: Optional[float] = None
    mean_loss_summ: Optional[float] = None
    mean_d_g: Optional[float] = None
    mean_d_s: Optional[float] = None
    mean_d_r: Optional[float] = None
    train_f: Optional[float] = None
    val_f: Optional[float] = None


class TrainResult(BaseModel):
    """outcome of a training run."""

    history: list[LossReport] = Field(default_factory=list)
    epochs: list[EpochSummary] = Field(default_factory=list)
    best_f: Optional[float] = None
    best_epoch: Optional[int] = None
    checkpoint_path: Optional[str] = None


class EvalResult(BaseModel):
    """keyshot precision, recall and harmonic F-measure of one video."""

    precision: float = Field(..., ge=0.0, le=1.0, description="P = overlap / |A|")
    recall: float = Field(..., ge=0.0, le=1.0, description="R = overlap / |B|")
    f_measure: float = Field(..., ge=0.0, le=100.0, description="F = 2PR / (P + R) * 100")


class VideoEvalRow(BaseModel):
    """one row of the evaluation report."""

    video_id: str
    n_segments: int = Field(..., ge=1)
    selected_frames: int = Field(..., ge=0, description="|A|")
    gt_frames: int = Field(..., ge=0, description="|B|")
    overlap: int = Field(..., ge=0)
    precision: float
    recall: float
    f_measure: float
