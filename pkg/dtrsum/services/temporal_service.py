"""
dilated temporal relational layers and recurrent encoders.

every function is a pure forward pass over Tensors; the only state it
touches is the batch-norm running statistics, which a TRAIN-mode pass
over more than one frame refreshes.
"""

import logging

from dtrsum.core import ops
from dtrsum.core.errors import ShapeError, ValidationError
from dtrsum.core.tensor import Tensor
from dtrsum.models.temporal import (
    BiLstmParams,
    DtrLayerParams,
    DtrNetworkParams,
    DtrUnitParams,
    LinearParams,
    LstmParams,
)
from dtrsum.schemas.config import Mode

logger = logging.getLogger(__name__)


def time_span(hole: int) -> int:
    """frames related by one unit with the given hole: 2h + 1."""

    if hole < 1:
        raise ValidationError(f"hole size must be at least 1, got {hole}")
    return 2 * hole + 1


def receptive_field(hole: int, kernel: int, layers: int) -> int:
    """
    input extent influencing one output frame after stacking.

    args:
        hole: hole size h
        kernel: temporal kernel size
        layers: number of stacked layers j

    returns:
        h * (kernel - 1) * j + 1
    """

    if hole < 1 or kernel < 1 or layers < 1:
        raise ValidationError(
            f"receptive field needs positive hole, kernel and layer count, got ({hole}, {kernel}, {layers})"
        )
    return hole * (kernel - 1) * layers + 1


def linear_forward(x: Tensor, params: LinearParams) -> Tensor:
    return ops.add(ops.matmul(x, params.weight), params.bias)


def _apply_tap(x: Tensor, tap, depthwise: bool) -> Tensor:
    return ops.mul(x, tap) if depthwise else ops.matmul(x, tap)


def dtr_unit_forward(f: Tensor, unit: DtrUnitParams) -> Tensor:
    """
    dilated kernel-3 temporal convolution.

    row t of the output combines input rows t - h, t and t + h; rows that
    fall outside the sequence contribute zeros.
    """

    f = ops.as_tensor(f)
    expected = unit.tap_center.shape[0]
    if f.ndim != 2 or f.shape[1] != expected:
        raise ShapeError(f"DTR unit expects T×{expected} input, got {f.shape}")
    if f.shape[0] == 0:
        raise ShapeError("DTR unit: empty sequence")

    previous = ops.shift(f, -unit.hole)
    following = ops.shift(f, unit.hole)
    out = _apply_tap(previous, unit.tap_prev, unit.depthwise)
    out = ops.add(out, _apply_tap(f, unit.tap_center, unit.depthwise))
    out = ops.add(out, _apply_tap(following, unit.tap_next, unit.depthwise))
    return ops.add(out, unit.bias)


def dtr_layer_forward(f: Tensor, layer: DtrLayerParams, mode: Mode, normalize: bool = True) -> Tensor:
    """
    relu(batchnorm(sum of the four unit outputs)).

    args:
        f: T×D input
        layer: layer parameters
        mode: TRAIN normalizes with the statistics of this sequence, INFER with running statistics
        normalize: False bypasses batch norm (identity-kernel checks)

    raises:
        ShapeError: if the sequence is empty
    """

    f = ops.as_tensor(f)
    if f.ndim != 2 or f.shape[0] == 0:
        raise ShapeError(f"DTR layer needs a non-empty T×D input, got {f.shape}")

    total = dtr_unit_forward(f, layer.units[0])
    for unit in layer.units[1:]:
        total = ops.add(total, dtr_unit_forward(f, unit))
    if not normalize:
        return ops.relu(total)

    if mode == Mode.TRAIN:
        if total.shape[0] > 1:
            batch_mean = total.data.mean(axis=0)
            batch_var = total.data.var(axis=0)
            layer.running_mean.data[...] = (
                layer.momentum * layer.running_mean.data + (1.0 - layer.momentum) * batch_mean
            )
            layer.running_var.data[...] = (
                layer.momentum * layer.running_var.data + (1.0 - layer.momentum) * batch_var
            )
            bn_mode = "batch"
        else:
            # variance of a single frame is undefined
            bn_mode = "affine"
    else:
        bn_mode = "running"

    normalized = ops.batch_norm(
        total,
        layer.bn_scale,
        layer.bn_shift,
        bn_mode,
        running_mean=layer.running_mean.data,
        running_var=layer.running_var.data,
        eps=layer.eps,
    )
    return ops.relu(normalized)


def dtr_network_forward(
    f: Tensor, net: DtrNetworkParams, mode: Mode, normalize: bool = True
) -> tuple[Tensor, list[Tensor]]:
    """
    run the layers in sequence.

    returns:
        the final output and the list of every layer's output, last included
    """

    outputs = []
    current = ops.as_tensor(f)
    for layer in net.layers:
        current = dtr_layer_forward(current, layer, mode, normalize=normalize)
        outputs.append(current)
    return current, outputs


def lstm_forward(x: Tensor, params: LstmParams, direction: str = "forward") -> Tensor:
    """
    hidden-state sequence in the original time order.

    the backward direction reads the sequence from its last frame, so row t
    summarizes frames t..T-1. x may also be a B×T×D batch of equal-length
    sequences sharing the parameters.
    """

    if direction not in ("forward", "backward"):
        raise ValidationError(f"unknown LSTM direction '{direction}'")
    return ops.lstm_recurrence(x, params.w_x, params.w_h, params.b, reverse=direction == "backward")


def bilstm_forward(x: Tensor, params: BiLstmParams) -> Tensor:
    """row t = [forward hidden at t, backward hidden at t], width 2H."""

    forward_hidden = lstm_forward(x, params.forward, "forward")
    backward_hidden = lstm_forward(x, params.backward, "backward")
    return ops.concat([forward_hidden, backward_hidden], axis=1)
