"""Dice loss gradient check and dilated-block receptive fields.

    python3 demos/loss_and_receptive_field.py
"""

import numpy as np

from prwalk.ddbshape import BlockTopology, impulse_response_support, shape_report
from prwalk.dicemath import (
    LossConfig,
    dice_grad,
    downsample_label,
    finite_difference_grad,
    max_relative_error,
    multiscale_loss,
)

rng = np.random.default_rng(0)
p = rng.random((16, 16))
g = (rng.random((16, 16)) < 0.5).astype(np.uint8)
err = max_relative_error(dice_grad(p, g), finite_difference_grad(p, g))
print(f"dice gradient vs central differences: max relative error {err:.2e}")

preds = [rng.random((16 >> n, 16 >> n)) for n in range(4)]
print(f"multi-scale loss over 4 scales: {multiscale_loss(preds, g, LossConfig()):.4f}")
print("label pyramid sizes:", [downsample_label(g, 2 ** n).shape for n in range(4)])

print("\nmode      blocks  receptive field  impulse support  layer inputs")
for mode in ("cascade", "parallel", "dense"):
    for repeats in (1, 4):
        topo = BlockTopology.from_rates(mode, (1, 2, 5), repeats=repeats)
        rep = shape_report(topo)
        support = impulse_response_support(topo, rep.receptive_field + 4)
        print(f"{mode:9s} {repeats:6d}  {rep.receptive_field:15d}  {support:15d}  "
              f"{rep.concat_channel_growth or '-'}")
