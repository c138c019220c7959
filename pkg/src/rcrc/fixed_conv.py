"""Fixed random-weight convolutional feature extractor.

The network is never trained: conv kernels and the dense projection are drawn
once from Normal(0, stddev**2) using a seeded :class:`~rcrc.prng.Stream` and
frozen.  There are no biases and every layer uses tanh, so an all-zero frame
maps to an all-zero feature vector.

Layout conventions (also written into checkpoints):

* frames are ``H x W x 3`` (HWC), values in [0, 1];
* conv activations are ``C x H x W`` (channel-major);
* the flatten before the dense layer is C-order over ``C x H x W``;
* "same" zero padding, output size ``ceil(H / stride)``, total padding
  ``max((out - 1) * stride + k - H, 0)`` split floor/ceil leading/trailing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from numpy.lib.stride_tricks import sliding_window_view

from .prng import PRNG_ID, Stream

FRAME_SIZE = 64
FRAME_CHANNELS = 3
LAYOUT = "frame=HWC; conv=CHW; flatten=C-order(CHW); padding=same(floor-lead)"

DEFAULT_LAYERS = ((31, 32, 2), (14, 64, 2), (6, 128, 2))

# Kernels at least this wide are convolved through the FFT in `extract`.
_FFT_MIN_KERNEL = 10


class InvalidInputError(ValueError):
    pass


@dataclass(frozen=True)
class ConvSpec:
    """Architecture of the extractor.  ``layers`` holds (kernel, filters, stride)."""

    layers: tuple[tuple[int, int, int], ...] = DEFAULT_LAYERS
    dense_out: int = 512
    weight_stddev: float = 0.06
    in_channels: int = FRAME_CHANNELS
    input_size: int = FRAME_SIZE

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(int(v) for v in l) for l in self.layers))
        if not self.layers:
            raise ValueError("at least one conv layer is required")
        for layer in self.layers:
            if len(layer) != 3 or min(layer) < 1:
                raise ValueError(f"bad conv layer {layer}: need positive (kernel, filters, stride)")
        if self.dense_out < 1 or self.in_channels < 1 or self.input_size < 1:
            raise ValueError("dense_out, in_channels and input_size must be positive")
        if not self.weight_stddev > 0:
            raise ValueError("weight_stddev must be positive")

    def spatial_sizes(self) -> list[int]:
        """Spatial side length at the input and after every conv layer."""
        sizes = [self.input_size]
        for _, _, stride in self.layers:
            sizes.append(-(-sizes[-1] // stride))
        return sizes

    @property
    def flat_dim(self) -> int:
        return self.layers[-1][1] * self.spatial_sizes()[-1] ** 2

    def to_dict(self) -> dict:
        return {
            "layers": [list(l) for l in self.layers],
            "dense_out": self.dense_out,
            "weight_stddev": self.weight_stddev,
            "in_channels": self.in_channels,
            "input_size": self.input_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConvSpec":
        return cls(
            layers=tuple(tuple(l) for l in d["layers"]),
            dense_out=d["dense_out"],
            weight_stddev=d["weight_stddev"],
            in_channels=d["in_channels"],
            input_size=d["input_size"],
        )


def preprocess(raw: np.ndarray, size: int = FRAME_SIZE) -> np.ndarray:
    """Nearest-neighbour resize of an ``H x W x 3`` byte image to ``size x size``, scaled to [0, 1].

    Output pixel ``(i, j)`` takes source pixel ``(floor(i*H/size), floor(j*W/size))``.
    """
    raw = np.asarray(raw)
    if raw.ndim != 3 or raw.shape[2] != FRAME_CHANNELS:
        raise InvalidInputError(f"expected an H x W x 3 image, got shape {raw.shape}")
    h, w = raw.shape[:2]
    if h < 1 or w < 1:
        raise InvalidInputError(f"empty image of shape {raw.shape}")
    rows = (np.arange(size) * h) // size
    cols = (np.arange(size) * w) // size
    resized = raw[rows[:, None], cols[None, :]]
    return resized.astype(np.float64) / 255.0


def _same_padding(size: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return out, total // 2, total - total // 2


def conv2d(x: np.ndarray, kernel: np.ndarray, stride: int = 1) -> np.ndarray:
    """Strided cross-correlation with "same" zero padding.

    Args:
        x: input of shape (Cin, H, W).
        kernel: weights of shape (Cout, Cin, k, k).
        stride: step between output positions.

    Returns:
        Array of shape (Cout, ceil(H/stride), ceil(W/stride)).
    """
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if x.ndim != 3 or kernel.ndim != 4:
        raise InvalidInputError("conv2d expects x (Cin,H,W) and kernel (Cout,Cin,k,k)")
    cin, h, w = x.shape
    cout, kcin, kh, kw = kernel.shape
    if kcin != cin:
        raise InvalidInputError(f"kernel expects {kcin} input channels, input has {cin}")
    if kh != kw or kh < 1:
        raise InvalidInputError(f"kernel must be square with k >= 1, got {kh}x{kw}")
    if stride < 1:
        raise InvalidInputError(f"stride must be >= 1, got {stride}")
    ho, top, bottom = _same_padding(h, kh, stride)
    wo, left, right = _same_padding(w, kw, stride)
    xp = np.pad(x, ((0, 0), (top, bottom), (left, right)))
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    windows = windows[:, :ho, :wo]
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(ho * wo, cin * kh * kw)
    out = cols @ kernel.reshape(cout, -1).T
    return out.T.reshape(cout, ho, wo)


class _FftConv:
    """Precomputed-spectrum version of `conv2d` for one layer and input size.

    Rows are decimated in the frequency domain (folding the spectrum by the
    stride), columns after the last inverse transform.
    """

    def __init__(self, kernel: np.ndarray, size: int, stride: int):
        k = kernel.shape[-1]
        self.stride = stride
        self.out, self.lead, self.trail = _same_padding(size, k, stride)
        n = scipy.fft.next_fast_len(size + self.lead + self.trail, real=True)
        while n % stride:
            n = scipy.fft.next_fast_len(n + 1, real=True)
        self.n = n
        spectrum = np.conj(scipy.fft.rfft2(kernel, s=(n, n)))
        # (rows, cols, Cout, Cin) so each frequency is one small matmul
        self.spectrum = np.ascontiguousarray(spectrum.transpose(2, 3, 0, 1))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        n, s = self.n, self.stride
        pad = (self.lead, self.trail)
        xp = np.pad(x, ((0, 0), pad, pad))
        xf = scipy.fft.rfft2(xp, s=(n, n)).transpose(1, 2, 0)[..., None]
        yf = np.matmul(self.spectrum, xf)[..., 0]
        folded = yf.reshape(s, n // s, *yf.shape[1:]).sum(axis=0) / s
        y = scipy.fft.ifft(folded, axis=0)
        y = scipy.fft.irfft(y, n=n, axis=1)[: self.out, : (self.out - 1) * s + 1 : s]
        return np.ascontiguousarray(y.transpose(2, 0, 1))


@dataclass(frozen=True, eq=False)
class FeatureExtractor:
    spec: ConvSpec
    seed: int
    kernels: tuple[np.ndarray, ...]
    dense_weight: np.ndarray
    prng_id: str = PRNG_ID
    _fft: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        sizes = self.spec.spatial_sizes()
        for i, (k, _, stride) in enumerate(self.spec.layers):
            if k >= _FFT_MIN_KERNEL:
                self._fft[i] = _FftConv(self.kernels[i], sizes[i], stride)

    @property
    def out_dim(self) -> int:
        return self.spec.dense_out

    def _conv(self, i: int, x: np.ndarray, stride: int, fast: bool) -> np.ndarray:
        plan = self._fft.get(i) if fast else None
        if plan is None:
            return conv2d(x, self.kernels[i], stride)
        return plan(x)

    def activations(self, frame: np.ndarray, fast: bool = True) -> list[np.ndarray]:
        """Post-tanh output of every layer: conv maps (C,H,W) then the dense vector."""
        frame = np.asarray(frame, dtype=np.float64)
        s = self.spec
        if frame.shape != (s.input_size, s.input_size, s.in_channels):
            raise InvalidInputError(
                f"frame must be {s.input_size}x{s.input_size}x{s.in_channels}, got {frame.shape}"
            )
        h = frame.transpose(2, 0, 1)
        outs = []
        for i, (_, _, stride) in enumerate(s.layers):
            h = np.tanh(self._conv(i, h, stride, fast))
            outs.append(h)
        outs.append(np.tanh(h.reshape(-1) @ self.dense_weight))
        return outs

    def extract(self, frame: np.ndarray, fast: bool = True) -> np.ndarray:
        return self.activations(frame, fast)[-1]


def build_extractor(spec: ConvSpec | None = None, seed: int = 0) -> FeatureExtractor:
    """Draw all weights from one stream: layer kernels in order, then the dense matrix."""
    spec = spec or ConvSpec()
    stream = Stream(seed)
    kernels = []
    cin = spec.in_channels
    for k, cout, _ in spec.layers:
        w = stream.normal((cout, cin, k, k), scale=spec.weight_stddev)
        w.setflags(write=False)
        kernels.append(w)
        cin = cout
    dense = stream.normal((spec.flat_dim, spec.dense_out), scale=spec.weight_stddev)
    dense.setflags(write=False)
    return FeatureExtractor(spec=spec, seed=seed, kernels=tuple(kernels), dense_weight=dense)


def extract(fe: FeatureExtractor, frame: np.ndarray) -> np.ndarray:
    return fe.extract(frame)
