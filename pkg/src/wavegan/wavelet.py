"""Single-level 2D Haar wavelet analysis/synthesis on (B, C, H, W) tensors.

The four analysis kernels are outer products of the 1D filters
L = (1/sqrt(2))[1, 1] and H = (1/sqrt(2))[-1, 1].  They are orthonormal, so
decomposition conserves energy and reconstruction is exact.  Convention:
LH carries height-direction detail (high-pass along H, low-pass along W),
HL the converse.

All functions are pure and differentiable; kernels are constants and never
part of any trainable parameter set.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

import torch

from .errors import ConfigurationError, ShapeError

BAND_NAMES = ("ll", "lh", "hl", "hh")


class FrequencyBands(NamedTuple):
    """The four half-resolution sub-bands of one feature map."""

    ll: torch.Tensor
    lh: torch.Tensor
    hl: torch.Tensor
    hh: torch.Tensor

    def map(self, fn) -> "FrequencyBands":
        return FrequencyBands(*(fn(b) for b in self))


def haar_kernels(dtype=torch.float32, device=None) -> torch.Tensor:
    """Return the four fixed 2x2 analysis kernels, stacked (4, 2, 2) in
    band order LL, LH, HL, HH."""
    lo = torch.tensor([1.0, 1.0], dtype=dtype, device=device) / 2.0 ** 0.5
    hi = torch.tensor([-1.0, 1.0], dtype=dtype, device=device) / 2.0 ** 0.5
    return torch.stack(
        [
            torch.outer(lo, lo),
            torch.outer(hi, lo),  # LH: high-pass along height
            torch.outer(lo, hi),  # HL: high-pass along width
            torch.outer(hi, hi),
        ]
    )


def _check_even(x: torch.Tensor) -> None:
    if x.dim() != 4:
        raise ShapeError(f"expected (B, C, H, W), got shape {tuple(x.shape)}")
    h, w = x.shape[-2:]
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise ShapeError(
            f"spatial dims must be even and >= 2 for Haar decomposition, got {h}x{w}"
        )


def haar_decompose(x: torch.Tensor) -> FrequencyBands:
    """Stride-2 correlation of x with the four Haar kernels.

    Returns bands of shape (B, C, H/2, W/2).  No padding: odd H or W is
    rejected.
    """
    _check_even(x)
    x00 = x[..., 0::2, 0::2]
    x01 = x[..., 0::2, 1::2]
    x10 = x[..., 1::2, 0::2]
    x11 = x[..., 1::2, 1::2]
    ll = 0.5 * (x00 + x01 + x10 + x11)
    lh = 0.5 * (-x00 - x01 + x10 + x11)
    hl = 0.5 * (-x00 + x01 - x10 + x11)
    hh = 0.5 * (x00 - x01 - x10 + x11)
    return FrequencyBands(ll, lh, hl, hh)


def _check_bands(bands: FrequencyBands) -> None:
    shape = bands.ll.shape
    for name, b in zip(BAND_NAMES, bands):
        if b.dim() != 4:
            raise ShapeError(f"band {name}: expected 4 axes, got {b.dim()}")
        if b.shape != shape:
            raise ShapeError(
                f"band shapes differ: ll {tuple(shape)} vs {name} {tuple(b.shape)}"
            )


def haar_reconstruct(bands: FrequencyBands) -> torch.Tensor:
    """Stride-2 transposed correlation of each band with its synthesis
    kernel, summed.  Exact inverse of :func:`haar_decompose`."""
    _check_bands(bands)
    ll, lh, hl, hh = bands
    b, c, h, w = ll.shape
    out = ll.new_empty((b, c, 2 * h, 2 * w))
    out[..., 0::2, 0::2] = 0.5 * (ll - lh - hl + hh)
    out[..., 0::2, 1::2] = 0.5 * (ll - lh + hl - hh)
    out[..., 1::2, 0::2] = 0.5 * (ll + lh - hl - hh)
    out[..., 1::2, 1::2] = 0.5 * (ll + lh + hl + hh)
    return out


def partial_reconstruct(bands: FrequencyBands, mask: Iterable[str]) -> torch.Tensor:
    """Reconstruct from a subset of bands, the rest treated as zero.

    `mask` is a subset of {"ll", "lh", "hl", "hh"}; empty masks are a
    configuration error.
    """
    selected = {m.lower() for m in mask}
    unknown = selected - set(BAND_NAMES)
    if unknown:
        raise ConfigurationError(f"unknown band names in mask: {sorted(unknown)}")
    if not selected:
        raise ConfigurationError("band mask must not be empty")
    _check_bands(bands)
    kept = FrequencyBands(
        *(b if name in selected else torch.zeros_like(b)
          for name, b in zip(BAND_NAMES, bands))
    )
    return haar_reconstruct(kept)


def band_energy(bands: FrequencyBands) -> torch.Tensor:
    """Total squared magnitude over all four bands."""
    return sum((b * b).sum() for b in bands)
