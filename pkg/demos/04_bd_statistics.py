"""Bjontegaard-delta statistics between rate-quality curves.

Run: python demos/04_bd_statistics.py
"""

import numpy as np

from rqpipe import RQCurve, RQPoint, bd_quality, bd_rate, pchip_slopes
from rqpipe.bd_stats import CUBIC_POLY, evaluate_interpolant

# Two four-point curves, the usual shape of a QP ladder sweep.
anchor = RQCurve("anchor", "vmaf", [
    RQPoint(1000, 62.0), RQPoint(1900, 71.5), RQPoint(3600, 78.0), RQPoint(7000, 82.0),
])
improved = RQCurve("improved", "vmaf", [
    RQPoint(950, 64.5), RQPoint(1800, 74.5), RQPoint(3400, 81.5), RQPoint(6800, 85.0),
])

# BD-quality: average vertical gap over the shared log-rate range.
result = bd_quality(anchor, improved)
print(f"BD-quality (improved vs anchor): {result.delta_quality:+.3f} VMAF points")
print(f"  integrated over log10(kbps) in [{result.overlap[0]:.3f}, {result.overlap[1]:.3f}]")

# BD-rate: average horizontal gap, as a percent rate change at equal quality.
rate = bd_rate(anchor, improved)
print(f"BD-rate: {rate.delta_rate_percent:+.2f}% "
      f"(negative means the improved method needs less rate)")
for warning in rate.warnings:
    print(f"  warning: {warning}")

# The default fit is a monotone piecewise-cubic Hermite: it passes through
# every knot and never overshoots monotone data.
xs = anchor.log_rates
ys = anchor.qualities
slopes = pchip_slopes(xs, ys)
dense = np.linspace(xs[0], xs[-1], 9)
print("\nfitted anchor curve (log10 rate -> quality):")
for x, v in zip(dense, evaluate_interpolant(xs, ys, slopes, dense)):
    print(f"  {x:.3f} -> {v:6.2f}")

# The legacy global cubic-polynomial fit is available for comparability
# with older BD tooling; the variant used is recorded in every result.
legacy = bd_quality(anchor, improved, interpolation=CUBIC_POLY)
print(f"\nsame delta with the legacy cubic fit: {legacy.delta_quality:+.3f} "
      f"(interpolation={legacy.interpolation})")
