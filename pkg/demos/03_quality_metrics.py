"""Quality metrics: native PSNR-Y and the external-tool hook.

Run: python demos/03_quality_metrics.py
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from rqpipe import Frame, VideoSpec, external_metric, psnr_y, psnr_y_sequence

rng = np.random.default_rng(3)
reference = Frame(y=rng.integers(0, 256, (64, 64)).astype(np.uint8))

# PSNR-Y falls as the error grows; identical content is the +inf sentinel.
print("luma PSNR under increasing uniform noise:")
print(f"  identical        : {psnr_y(reference, reference, 8)} dB")
for sigma in (1, 4, 16):
    noisy = np.clip(
        reference.y.astype(int) + rng.integers(-sigma, sigma + 1, reference.y.shape), 0, 255
    ).astype(np.uint8)
    print(f"  noise +-{sigma:<2d}       : {psnr_y(reference, Frame(y=noisy), 8):.2f} dB")

# Sequence scores aggregate per-frame values; infinite frames are capped
# before averaging (cap recorded with the run, 100 dB by default).
frames = [reference, reference, Frame(y=np.clip(reference.y + 1, 0, 255).astype(np.uint8))]
score = psnr_y_sequence([reference] * 3, frames, 8)
print(f"\nsequence psnr_y: {score.sequence_value:.3f} dB "
      f"(per-frame {['%.1f' % min(v, 100.0) for v in score.per_frame]}, {score.aggregation})")

# External metrics (VMAF, IV-PSNR, ...) are spawned, never reimplemented.
# Any command printing one score per line (or key=value) plugs in; here a
# stub stands in for the real tool.
stub = Path(tempfile.mkdtemp(prefix="rqpipe_demo_")) / "fake_vmaf.py"
stub.write_text("import sys\nfor _ in range(3): print('93.7')\n")
spec = VideoSpec(64, 64, 8, "400", frame_count=3)
vmaf = external_metric(
    f"{sys.executable} {stub} --ref {{ref}} --dist {{dist}} -w {{w}} -h {{h}}",
    "reference.yuv", "distorted.yuv", spec, metric_id="vmaf",
)
print(f"\nexternal stub 'vmaf': per-frame {vmaf.per_frame}, sequence {vmaf.sequence_value}")
