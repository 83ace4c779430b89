import numpy as np

from dtrsum.core.errors import ValidationError
from dtrsum.core.tensor import Parameter
from dtrsum.models.base import Buffer, ParameterGroup, uniform_init
from dtrsum.schemas.config import TEMPORAL_KERNEL


class LinearParams(ParameterGroup):
    """affine map x @ weight + bias."""

    def __init__(self, prefix: str, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__(prefix)
        self.weight = Parameter(uniform_init(rng, (in_dim, out_dim), in_dim), self._path("weight"))
        self.bias = Parameter(np.zeros(out_dim), self._path("bias"))

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


class DtrUnitParams(ParameterGroup):
    """
    one dilated temporal relational unit: a kernel-3 convolution over time
    whose taps sit at t - hole, t and t + hole.

    with depthwise=True each tap is a per-channel scale (in_dim must equal
    out_dim) instead of a full channel-mixing matrix.
    """

    def __init__(
        self,
        prefix: str,
        hole: int,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        depthwise: bool = False,
    ):
        super().__init__(prefix)
        if hole < 1:
            raise ValidationError(f"hole size must be at least 1, got {hole}")
        if depthwise and in_dim != out_dim:
            raise ValidationError("depthwise DTR units need equal input and output widths")
        self.hole = hole
        self.depthwise = depthwise
        tap_shape = (in_dim,) if depthwise else (in_dim, out_dim)
        fan_in = TEMPORAL_KERNEL * (1 if depthwise else in_dim)
        self.tap_prev = Parameter(uniform_init(rng, tap_shape, fan_in), self._path("tap_prev"))
        self.tap_center = Parameter(uniform_init(rng, tap_shape, fan_in), self._path("tap_center"))
        self.tap_next = Parameter(uniform_init(rng, tap_shape, fan_in), self._path("tap_next"))
        self.bias = Parameter(np.zeros(out_dim), self._path("bias"))

    @property
    def taps(self) -> tuple[Parameter, Parameter, Parameter]:
        return self.tap_prev, self.tap_center, self.tap_next


class DtrLayerParams(ParameterGroup):
    """four DTR units with distinct holes, summed and batch-normalized."""

    def __init__(
        self,
        prefix: str,
        holes: tuple[int, ...],
        dim: int,
        rng: np.random.Generator,
        depthwise: bool = False,
        momentum: float = 0.9,
        eps: float = 1e-8,
    ):
        super().__init__(prefix)
        if len(holes) != 4:
            raise ValidationError(f"a DTR layer has four units, got holes {tuple(holes)}")
        self.units = [
            DtrUnitParams(self._path(f"unit{m}"), hole, dim, dim, rng, depthwise)
            for m, hole in enumerate(holes)
        ]
        self.bn_scale = Parameter(np.ones(dim), self._path("bn_scale"))
        self.bn_shift = Parameter(np.zeros(dim), self._path("bn_shift"))
        self.running_mean = Buffer(np.zeros(dim), self._path("running_mean"))
        self.running_var = Buffer(np.ones(dim), self._path("running_var"))
        self.momentum = momentum
        self.eps = eps

    @property
    def holes(self) -> tuple[int, ...]:
        return tuple(unit.hole for unit in self.units)


class DtrNetworkParams(ParameterGroup):
    """a stack of DTR layers sharing one hole configuration."""

    def __init__(
        self,
        prefix: str,
        holes: tuple[int, ...],
        dim: int,
        n_layers: int,
        rng: np.random.Generator,
        depthwise: bool = False,
        momentum: float = 0.9,
        eps: float = 1e-8,
    ):
        super().__init__(prefix)
        if n_layers < 1:
            raise ValidationError("a DTR network needs at least one layer")
        self.layers = [
            DtrLayerParams(self._path(f"layer{j}"), holes, dim, rng, depthwise, momentum, eps)
            for j in range(n_layers)
        ]


class LstmParams(ParameterGroup):
    """
    single-direction LSTM.

    gate blocks along the 4H axis: input, forget, output, candidate. the
    forget-gate bias starts at 1.0.
    """

    def __init__(self, prefix: str, in_dim: int, hidden: int, rng: np.random.Generator):
        super().__init__(prefix)
        self.hidden = hidden
        self.w_x = Parameter(uniform_init(rng, (in_dim, 4 * hidden), hidden), self._path("w_x"))
        self.w_h = Parameter(uniform_init(rng, (hidden, 4 * hidden), hidden), self._path("w_h"))
        bias = np.zeros(4 * hidden)
        bias[hidden:2 * hidden] = 1.0
        self.b = Parameter(bias, self._path("b"))


class BiLstmParams(ParameterGroup):
    """forward and backward LSTM directions with independent weights."""

    def __init__(self, prefix: str, in_dim: int, hidden: int, rng: np.random.Generator):
        super().__init__(prefix)
        self.forward = LstmParams(self._path("forward"), in_dim, hidden, rng)
        self.backward = LstmParams(self._path("backward"), in_dim, hidden, rng)

    @property
    def hidden(self) -> int:
        return self.forward.hidden
