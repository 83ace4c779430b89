import logging
from typing import Optional

import numpy as np

from dtrsum.core import ops
from dtrsum.core.errors import ShapeError
from dtrsum.core.tensor import Tensor
from dtrsum.models.generator import GeneratorParams
from dtrsum.schemas.config import Mode
from dtrsum.services.temporal_service import bilstm_forward, dtr_network_forward, linear_forward

logger = logging.getLogger(__name__)


def temporal_encode(f_v, params: GeneratorParams, mode: Mode) -> tuple[Optional[Tensor], Optional[Tensor]]:
    """
    run both temporal branches on the raw features.

    returns:
        (f_bar, f_hat): Bi-LSTM output T×2H and DTR output T×D; a branch
        disabled by the model configuration is returned as None
    """

    f_v = ops.as_tensor(f_v)
    if f_v.ndim != 2 or f_v.shape[1] != params.config.feature_dim:
        raise ShapeError(f"generator expects T×{params.config.feature_dim} features, got {f_v.shape}")
    if f_v.shape[0] == 0:
        raise ShapeError("generator: empty sequence")

    f_bar = bilstm_forward(f_v, params.bilstm) if params.bilstm is not None else None
    f_hat = dtr_network_forward(f_v, params.dtr, mode)[0] if params.dtr is not None else None
    return f_bar, f_hat


def _joint_features(f_bar: Optional[Tensor], f_hat: Optional[Tensor]) -> Tensor:
    parts = [part for part in (f_hat, f_bar) if part is not None]
    if not parts:
        raise ShapeError("generator: no temporal features to combine")
    if len(parts) == 2 and parts[0].shape[0] != parts[1].shape[0]:
        raise ShapeError(f"temporal branches disagree on length: {parts[0].shape} vs {parts[1].shape}")
    return ops.concat(parts, axis=1)


def encode_video(f_bar: Optional[Tensor], f_hat: Optional[Tensor], params: GeneratorParams) -> Tensor:
    """compact encoding f_e: one affine map of [f_hat, f_bar] per frame, no activation."""

    joint = _joint_features(f_bar, f_hat)
    if joint.shape[1] != params.encoder.in_dim:
        raise ShapeError(f"encoder expects width {params.encoder.in_dim}, got {joint.shape[1]}")
    return linear_forward(joint, params.encoder)


def predict_scores(
    f_bar: Optional[Tensor],
    f_hat: Optional[Tensor],
    params: GeneratorParams,
    mode: Mode,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """
    per-frame importance scores sigmoid(affine(dropout([f_hat, f_bar]))).

    dropout only runs in TRAIN mode and draws its mask from rng.
    """

    joint = _joint_features(f_bar, f_hat)
    if joint.shape[1] != params.scorer.in_dim:
        raise ShapeError(f"scorer expects width {params.scorer.in_dim}, got {joint.shape[1]}")
    dropped = ops.dropout(joint, params.config.dropout_rate, rng, training=mode == Mode.TRAIN)
    logits = linear_forward(dropped, params.scorer)
    return ops.reshape(ops.sigmoid(logits), (joint.shape[0],))


def generator_forward(
    f_v,
    params: GeneratorParams,
    mode: Mode,
    rng: Optional[np.random.Generator] = None,
    encode: Optional[bool] = None,
) -> tuple[Tensor, Optional[Tensor]]:
    """
    full generator pass.

    args:
        f_v: T×D frame features
        params: generator parameters
        mode: TRAIN or INFER
        rng: dropout stream, required in TRAIN mode when dropout is enabled
        encode: compute f_e; defaults to True in TRAIN mode and False in INFER mode

    returns:
        (s_s, f_e) with f_e None when not requested
    """

    if encode is None:
        encode = mode == Mode.TRAIN
    f_bar, f_hat = temporal_encode(f_v, params, mode)
    scores = predict_scores(f_bar, f_hat, params, mode, rng)
    encoded = encode_video(f_bar, f_hat, params) if encode else None
    return scores, encoded
