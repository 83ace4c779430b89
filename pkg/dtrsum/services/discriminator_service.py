import logging
from typing import Optional

import numpy as np

from dtrsum.core import ops
from dtrsum.core.errors import ShapeError
from dtrsum.core.tensor import Tensor
from dtrsum.models.discriminator import DiscriminatorParams
from dtrsum.models.temporal import BiLstmParams
from dtrsum.services.temporal_service import linear_forward, lstm_forward

logger = logging.getLogger(__name__)


def mask_summary(f_e, scores) -> Tensor:
    """masked summary I: row t of f_e scaled by score t."""

    f_e, scores = ops.as_tensor(f_e), ops.as_tensor(scores)
    if scores.ndim != 1 or f_e.ndim != 2 or f_e.shape[0] != scores.shape[0]:
        raise ShapeError(f"cannot mask encoding {f_e.shape} with scores {scores.shape}")
    return ops.row_scale(f_e, scores)


def sample_random_scores(num_frames: int, rng: np.random.Generator) -> Tensor:
    """i.i.d. uniform [0, 1) scores s_r."""

    if num_frames < 1:
        raise ShapeError(f"random summary needs at least one frame, got {num_frames}")
    return Tensor(rng.uniform(0.0, 1.0, size=num_frames))


def encode_pooled_batch(xs: list, params: BiLstmParams) -> Tensor:
    """
    B×2H encodings of equal-length sequences in one recurrent pass.

    row b is the forward hidden state at the last frame of sequence b next
    to its backward hidden state at the first frame.
    """

    batch = ops.stack(xs)
    steps = batch.shape[1]
    forward_hidden = lstm_forward(batch, params.forward, "forward")
    backward_hidden = lstm_forward(batch, params.backward, "backward")
    return ops.concat([ops.time_step(forward_hidden, steps - 1), ops.time_step(backward_hidden, 0)], axis=1)


def encode_pooled(x: Tensor, params: BiLstmParams) -> Tensor:
    """1×2H encoding: forward hidden at the last frame next to backward hidden at the first."""

    return encode_pooled_batch([ops.as_tensor(x)], params)


def _head_forward(video_code: Tensor, summary_codes: Tensor, params: DiscriminatorParams) -> list[Tensor]:
    # one head pass for every summary code; the video code is repeated per row
    count = summary_codes.shape[0]
    repeated = ops.matmul(Tensor(np.ones((count, 1))), video_code)
    hidden = ops.concat([repeated, summary_codes], axis=1)
    for index, layer in enumerate(params.head):
        hidden = linear_forward(hidden, layer)
        if index < len(params.head) - 1:
            hidden = ops.relu(hidden)
    scores = ops.sigmoid(hidden)
    return [ops.reshape(ops.slice_rows(scores, row, row + 1), ()) for row in range(count)]


def _check_pair(f_v: Tensor, masked: Tensor, params: DiscriminatorParams) -> None:
    config = params.config
    if f_v.ndim != 2 or f_v.shape[1] != config.feature_dim:
        raise ShapeError(f"discriminator expects T×{config.feature_dim} features, got {f_v.shape}")
    if masked.ndim != 2 or masked.shape != (f_v.shape[0], config.encoded_dim):
        raise ShapeError(
            f"masked summary must be {f_v.shape[0]}×{config.encoded_dim}, got {masked.shape}"
        )


def discriminate(f_v, masked, params: DiscriminatorParams) -> Tensor:
    """
    score one (video, masked summary) pair in (0, 1).

    returns:
        a scalar tensor
    """

    f_v, masked = ops.as_tensor(f_v), ops.as_tensor(masked)
    _check_pair(f_v, masked, params)
    video_code = encode_pooled(f_v, params.video_encoder)
    return _head_forward(video_code, encode_pooled(masked, params.summary_encoder), params)[0]


def discriminate_triple(
    f_v, masked_gt, masked_generated, masked_random, params: DiscriminatorParams
) -> tuple[Tensor, Tensor, Optional[Tensor]]:
    """
    scores (d_g, d_s, d_r) of the ground-truth, generated and random pairs.

    the video encoding is computed once and shared, and the summaries go
    through the summary encoder and the head as one batch; a None random
    summary (two-player mode) yields d_r = None.
    """

    f_v = ops.as_tensor(f_v)
    summaries = [
        ops.as_tensor(masked) for masked in (masked_gt, masked_generated, masked_random) if masked is not None
    ]
    for masked in summaries:
        _check_pair(f_v, masked, params)
    video_code = encode_pooled(f_v, params.video_encoder)
    scores = _head_forward(video_code, encode_pooled_batch(summaries, params.summary_encoder), params)
    d_r = scores[2] if masked_random is not None else None
    return scores[0], scores[1], d_r
