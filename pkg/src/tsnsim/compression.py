"""Edge compression of the AR stream and the CR / PSNR / MOS quality utilities."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace

from .frames import App, ConfigError
from .traffic import GeneratorSpec

IDENTICAL = math.inf


@dataclass(frozen=True)
class CompressionSpec:
    ratio: float = 22.0
    processing_ms_per_mp: float = 20.0
    width: int = 1920
    height: int = 1080

    def __post_init__(self):
        if not self.ratio >= 1:
            raise ConfigError(f"compression ratio must be >= 1, got {self.ratio}", [self.ratio])
        if self.processing_ms_per_mp < 0:
            raise ConfigError("processing rate must be non-negative", [self.processing_ms_per_mp])
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("resolution must be positive", [(self.width, self.height)])


def compression_ratio(uncompressed_size, compressed_size) -> float:
    if uncompressed_size <= 0 or compressed_size <= 0:
        raise ValueError("sizes must be positive")
    return uncompressed_size / compressed_size


def processing_delay(resolution, processing_ms_per_mp) -> int:
    """Edge encoding time in ns: megapixels x ms-per-megapixel."""
    width, height = resolution
    if width <= 0 or height <= 0:
        raise ValueError("resolution must be positive")
    # (w*h / 1e6) MP * rate ms/MP * 1e6 ns/ms
    return round(width * height * processing_ms_per_mp)


def apply_compression(ar_spec: GeneratorSpec, comp: CompressionSpec) -> GeneratorSpec:
    """Rescale a video stream: same frame size, interarrival stretched by the ratio, and
    every frame enters the network ``processing_delay`` after it was captured."""
    if ar_spec.app is not App.AR:
        raise ConfigError(f"compression applies to the AR stream, not {ar_spec.app}",
                          [ar_spec.app.value])
    if comp.ratio < 1:
        raise ConfigError(f"compression ratio must be >= 1, got {comp.ratio}", [comp.ratio])
    return replace(
        ar_spec,
        interarrival=round(ar_spec.interarrival * comp.ratio),
        injection_offset=processing_delay((comp.width, comp.height), comp.processing_ms_per_mp),
    )


def psnr(max_pixel_value, mse) -> float:
    """Peak signal-to-noise ratio in dB; ``IDENTICAL`` (inf) for zero error."""
    if mse < 0:
        raise ValueError(f"mean squared error cannot be negative ({mse})")
    if max_pixel_value <= 0:
        raise ValueError("max pixel value must be positive")
    if mse == 0:
        return IDENTICAL
    return 10 * math.log10(max_pixel_value ** 2 / mse)


def mse_for_psnr(max_pixel_value, psnr_db) -> float:
    return max_pixel_value ** 2 / 10 ** (psnr_db / 10)


# lower PSNR bound (dB) of MOS 2, 3, 4, 5
DEFAULT_MOS_THRESHOLDS = (20.0, 25.0, 31.0, 37.0)


def mos_from_psnr(psnr_db, thresholds=DEFAULT_MOS_THRESHOLDS) -> int:
    """1 unacceptable, 2 poor, 3 fair, 4 good, 5 excellent."""
    if len(thresholds) != 4 or list(thresholds) != sorted(thresholds):
        raise ValueError("MOS thresholds must be four ascending PSNR values")
    if math.isnan(psnr_db):
        return 1
    return 1 + bisect.bisect_right(thresholds, psnr_db)
