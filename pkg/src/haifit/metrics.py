"""Evaluation metrics: PSNR, SSIM, LPIPS-style distance, and Fréchet distance / FID."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import torch

from .errors import NumericalError, SampleCountError, ShapeError

PEAK = 255.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB on the [0, 255] scale; inf when identical."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse)


def _gaussian_kernel(sigma: float = 1.5, radius: int = 5) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # separable 'valid' correlation; windows never cross the border
    n = len(kernel)
    rows = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, img)
    return np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="valid"), 0, rows)


def _ssim_single(a: np.ndarray, b: np.ndarray, kernel: np.ndarray) -> float:
    c1 = (0.01 * PEAK) ** 2
    c2 = (0.03 * PEAK) ** 2
    ux = _filter_valid(a, kernel)
    uy = _filter_valid(b, kernel)
    uxx = _filter_valid(a * a, kernel)
    uyy = _filter_valid(b * b, kernel)
    uxy = _filter_valid(a * b, kernel)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    cxy = uxy - ux * uy
    num = (2.0 * ux * uy + c1) * (2.0 * cxy + c2)
    den = (ux * ux + uy * uy + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray, sigma: float = 1.5, radius: int = 5) -> float:
    """Mean local SSIM on [0, 255] images with an 11-tap gaussian window.

    Accepts (h, w) or (h, w, c); channels are averaged.  The border where the
    window would leave the image is excluded, matching the usual convention.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    kernel = _gaussian_kernel(sigma, radius)
    if a.ndim == 2:
        return _ssim_single(a, b, kernel)
    if a.ndim == 3:
        return float(np.mean([_ssim_single(a[..., c], b[..., c], kernel)
                              for c in range(a.shape[2])]))
    raise ShapeError(f"expected 2-D or 3-D image, got {a.ndim}-D")


@dataclass(frozen=True)
class DistributionStats:
    """Gaussian fit of a feature distribution: mean vector and covariance."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise ShapeError(f"bad stats shapes: mu {mu.shape}, sigma {sigma.shape}")
        if not np.allclose(sigma, sigma.T, atol=1e-8):
            raise ShapeError("covariance must be symmetric")
        if np.linalg.eigvalsh((sigma + sigma.T) / 2).min() < -1e-8:
            raise NumericalError("covariance is not numerically PSD")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", (sigma + sigma.T) / 2)

    @classmethod
    def from_samples(cls, features: np.ndarray) -> "DistributionStats":
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise ShapeError(f"expected (n, d) features, got {features.shape}")
        n, d = features.shape
        if n < d + 1:
            raise SampleCountError(f"need at least d+1={d + 1} samples, got {n}")
        return cls(features.mean(axis=0), np.cov(features, rowvar=False))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.T) / 2)
    scale = max(abs(vals).max(), 1.0)
    if vals.min() < -1e-3 * scale:
        raise NumericalError(f"matrix square root far from PSD (min eig {vals.min():g})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(s1: DistributionStats, s2: DistributionStats) -> float:
    """||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^{1/2}), via eigendecomposition."""
    diff = s1.mu - s2.mu
    sqrt1 = _psd_sqrt(s1.sigma)
    inner = _psd_sqrt(sqrt1 @ s2.sigma @ sqrt1)
    return float(diff @ diff + np.trace(s1.sigma) + np.trace(s2.sigma) - 2.0 * np.trace(inner))


def fid_from_samples(real: np.ndarray, fake: np.ndarray) -> float:
    """Fréchet distance between unbiased Gaussian fits of two feature sets."""
    return frechet_distance(DistributionStats.from_samples(real),
                            DistributionStats.from_samples(fake))


def lpips_distance(a: torch.Tensor, b: torch.Tensor, backbone) -> float:
    """Perceptual distance: channel-normalized feature gaps, squared, spatially
    averaged, summed over the backbone's stages."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    total = 0.0
    with torch.no_grad():
        for fa, fb in zip(backbone.stages(a), backbone.stages(b)):
            na = fa / torch.sqrt((fa * fa).sum(dim=1, keepdim=True) + 1e-10)
            nb = fb / torch.sqrt((fb * fb).sum(dim=1, keepdim=True) + 1e-10)
            total += float(((na - nb) ** 2).sum(dim=1).mean())
    return total


@dataclass
class MetricsReport:
    psnr_db: float
    ssim: float
    lpips: float
    fid: float
    n: int
    config_fingerprint: str = ""

    def to_json(self) -> str:
        # the report document carries exactly these keys
        return json.dumps({
            "psnr_db": self.psnr_db, "ssim": self.ssim,
            "lpips": self.lpips, "fid": self.fid, "n": self.n,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        d = json.loads(text)
        return cls(psnr_db=d["psnr_db"], ssim=d["ssim"], lpips=d["lpips"],
                   fid=d["fid"], n=d["n"])
