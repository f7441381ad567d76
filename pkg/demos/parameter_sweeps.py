"""ROI side and alpha sweeps over a handful of synthetic fixtures.

    python3 demos/parameter_sweeps.py

Accuracy climbs while the ROI is smaller than the longest gap and then
levels off; time keeps growing with the ROI. With a little noise on the
map, a larger alpha lets the distance term drag walkers off the ridge.
"""

from prwalk.cli import run_sweep
from prwalk.synth import SynthConfig, fixture_suite

fixtures = []
for length in (10, 30, 60):
    fixtures += fixture_suite(2, SynthConfig(vessel_width=5, ridge_width=1, noise_amplitude=0.0,
                                             blur_radius=0, gap_length=length, gap_count=1,
                                             branch_count=2))
print("roi_side      acc      sen   stamped   ms")
for row in run_sweep(fixtures, "roi-size", repeats=5):
    print(f"{row['value']:8d}  {row['acc']:.5f}  {row['sen']:.4f}  {row['stamped_pixels']:7d}"
          f"  {1e3 * row['seconds']:5.1f}")

noisy = fixture_suite(8, SynthConfig(vessel_width=5, ridge_width=1, noise_amplitude=0.05,
                                     blur_radius=1, bend=0.35))
print("\nalpha    err   stamped")
for row in run_sweep(noisy, "alpha", repeats=1):
    print(f"{row['value']:5.2f}  {row['err']:.3f}  {row['stamped_pixels']:7d}")
