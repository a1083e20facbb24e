"""Gabor-hash binarization of speckle patterns.

A speckle pattern is mean-subtracted, convolved with a DC-free complex Gabor
kernel, and binarized by the sign of the real response: one bit per pixel,
so a 1280x1024 detector yields a 1,310,720-bit key.

The carrier period defaults to twice the measured mean speckle grain
(estimated from the intensity autocorrelation FWHM), which maximizes the
response variance. ``GaborHasher`` wraps the same pipeline in a
scikit-learn transformer so the calibration step composes with pipelines.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .exceptions import DimensionError, FormatError, ParameterError
from .optics import SpecklePattern

KEY_MAGIC = b"BPUF"
KEY_VERSION = 1


@dataclass(frozen=True)
class GaborKernel:
    """Complex Gabor kernel: Gaussian envelope times a plane-wave carrier."""

    size: int = 17
    wavelength_px: float = 4.0
    sigma_px: float = 2.0
    orientation: float = 0.0

    def validate(self) -> None:
        if self.size < 3 or self.size % 2 == 0:
            raise ParameterError(f"kernel size must be odd and >= 3, got {self.size}")
        if self.wavelength_px <= 0:
            raise ParameterError(f"wavelength_px must be > 0, got {self.wavelength_px}")
        if self.sigma_px <= 0:
            raise ParameterError(f"sigma_px must be > 0, got {self.sigma_px}")

    def build(self) -> np.ndarray:
        """Materialize the kernel with its DC component removed."""
        self.validate()
        half = self.size // 2
        y, x = np.mgrid[-half:half + 1, -half:half + 1]
        envelope = np.exp(-(x**2 + y**2) / (2.0 * self.sigma_px**2))
        u = x * np.cos(self.orientation) + y * np.sin(self.orientation)
        carrier = np.exp(2j * np.pi * u / self.wavelength_px)
        kernel = envelope * carrier
        return kernel - kernel.mean()


@dataclass(frozen=True)
class BinaryKey:
    """Row-major bit array packed MSB-first into bytes."""

    dims: tuple[int, int]
    packed: bytes = field(repr=False)

    @property
    def length(self) -> int:
        return self.dims[0] * self.dims[1]

    @staticmethod
    def from_bits(bits: np.ndarray) -> "BinaryKey":
        arr = np.asarray(bits)
        if arr.ndim != 2:
            raise ParameterError("bits must be a 2D array")
        packed = np.packbits(arr.astype(np.uint8).ravel())
        return BinaryKey(dims=arr.shape, packed=packed.tobytes())

    def bits(self) -> np.ndarray:
        """Unpack to a 2D uint8 array of 0/1."""
        flat = np.unpackbits(np.frombuffer(self.packed, dtype=np.uint8),
                             count=self.length)
        return flat.reshape(self.dims)

    def fraction_ones(self) -> float:
        flat = np.unpackbits(np.frombuffer(self.packed, dtype=np.uint8),
                             count=self.length)
        return float(flat.mean())

    def __xor__(self, other: "BinaryKey") -> "BinaryKey":
        if self.dims != other.dims:
            raise DimensionError(f"key dims differ: {self.dims} vs {other.dims}")
        a = np.frombuffer(self.packed, dtype=np.uint8)
        b = np.frombuffer(other.packed, dtype=np.uint8)
        return BinaryKey(dims=self.dims, packed=np.bitwise_xor(a, b).tobytes())

    def __invert__(self) -> "BinaryKey":
        bits = 1 - self.bits()
        return BinaryKey.from_bits(bits)

    def to_bytes(self, magic: bytes = KEY_MAGIC) -> bytes:
        header = struct.pack("<4sIII", magic, KEY_VERSION, *self.dims)
        return header + self.packed

    @staticmethod
    def from_bytes(data: bytes, magic: bytes = KEY_MAGIC) -> "BinaryKey":
        if len(data) < 16:
            raise FormatError("key blob shorter than 16-byte header")
        got_magic, version, rows, cols = struct.unpack("<4sIII", data[:16])
        if got_magic != magic:
            raise FormatError(f"bad magic {got_magic!r}, expected {magic!r}")
        if version != KEY_VERSION:
            raise FormatError(f"unsupported key format version {version}")
        nbytes = (rows * cols + 7) // 8
        payload = data[16:16 + nbytes]
        if len(payload) != nbytes:
            raise FormatError("key payload truncated")
        return BinaryKey(dims=(rows, cols), packed=payload)

    def save(self, path, magic: bytes = KEY_MAGIC) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes(magic))

    @staticmethod
    def load(path, magic: bytes = KEY_MAGIC) -> "BinaryKey":
        with open(path, "rb") as fh:
            return BinaryKey.from_bytes(fh.read(), magic)


def _as_intensity(pattern) -> np.ndarray:
    if isinstance(pattern, SpecklePattern):
        return pattern.intensity.astype(np.float64)
    arr = np.asarray(pattern, dtype=np.float64)
    if arr.ndim != 2:
        raise ParameterError("pattern must be 2D")
    return arr


def gabor_filter(pattern, kernel: GaborKernel) -> np.ndarray:
    """Same-size complex convolution of the mean-subtracted intensity.

    Borders are mirror-padded.
    """
    img = _as_intensity(pattern)
    k = kernel.build()
    if k.shape[0] >= img.shape[0] or k.shape[1] >= img.shape[1]:
        raise ParameterError(
            f"kernel {k.shape} must be smaller than pattern {img.shape}")
    img = img - img.mean()
    real = ndimage.convolve(img, k.real, mode="mirror")
    imag = ndimage.convolve(img, k.imag, mode="mirror")
    return real + 1j * imag


def binarize(response: np.ndarray) -> BinaryKey:
    """Bit = 1 where Re(response) > 0; an exact zero maps to 0."""
    resp = np.asarray(response)
    return BinaryKey.from_bits(resp.real > 0)


def estimate_grain_size(pattern) -> float:
    """Mean speckle grain diameter from the intensity autocorrelation FWHM."""
    img = _as_intensity(pattern)
    img = img - img.mean()
    spectrum = np.abs(np.fft.fft2(img)) ** 2
    acf = np.fft.ifft2(spectrum).real
    peak = acf[0, 0]
    if peak <= 0:
        raise ParameterError("pattern has zero variance; cannot estimate grain")

    def half_width(profile: np.ndarray) -> float:
        # first lag where the normalized ACF falls below 1/2, with linear
        # interpolation between lags
        half_len = profile.size // 2
        prev = 1.0
        for lag in range(1, half_len):
            cur = profile[lag] / peak
            if cur < 0.5:
                return (lag - 1) + (prev - 0.5) / (prev - cur)
            prev = cur
        return float(half_len)

    fwhm_y = 2.0 * half_width(acf[:, 0])
    fwhm_x = 2.0 * half_width(acf[0, :])
    return max(1.0, 0.5 * (fwhm_x + fwhm_y))


def default_kernel(pattern, size: int = 17, orientation: float = 0.0) -> GaborKernel:
    """Kernel with carrier matched to twice the measured grain size."""
    wavelength = max(2.0, 2.0 * estimate_grain_size(pattern))
    return GaborKernel(size=size, wavelength_px=wavelength,
                       sigma_px=wavelength / 2.0, orientation=orientation)


def hash_speckle(pattern, kernel: GaborKernel | None = None) -> BinaryKey:
    """Gabor-filter a speckle pattern and binarize the response."""
    if kernel is None:
        kernel = default_kernel(pattern)
    return binarize(gabor_filter(pattern, kernel))


class GaborHasher(BaseEstimator, TransformerMixin):
    """Scikit-learn transformer turning speckle patterns into binary keys.

    ``fit`` calibrates the carrier period from the mean speckle grain of the
    training patterns unless ``wavelength_px`` is given explicitly;
    ``transform`` maps each pattern to a :class:`BinaryKey`. ``stride``
    subsamples the response grid for decorrelated (shorter) keys.
    """

    def __init__(self, size=17, wavelength_px=None, sigma_px=None,
                 orientation=0.0, stride=1):
        self.size = size
        self.wavelength_px = wavelength_px
        self.sigma_px = sigma_px
        self.orientation = orientation
        self.stride = stride

    def fit(self, X, y=None):
        patterns = list(X)
        if self.wavelength_px is not None:
            wavelength = float(self.wavelength_px)
        else:
            if not patterns:
                raise ParameterError("fit requires at least one pattern")
            wavelength = max(2.0, 2.0 * float(
                np.mean([estimate_grain_size(p) for p in patterns])))
        sigma = float(self.sigma_px) if self.sigma_px is not None else wavelength / 2.0
        self.kernel_ = GaborKernel(size=self.size, wavelength_px=wavelength,
                                   sigma_px=sigma, orientation=self.orientation)
        self.kernel_.validate()
        if self.stride < 1:
            raise ParameterError(f"stride must be >= 1, got {self.stride}")
        return self

    def transform(self, X):
        if not hasattr(self, "kernel_"):
            raise NotFittedError("GaborHasher is not fitted; call fit first")
        keys = []
        for pattern in X:
            resp = gabor_filter(pattern, self.kernel_)
            if self.stride > 1:
                resp = resp[::self.stride, ::self.stride]
            keys.append(binarize(resp))
        return keys
