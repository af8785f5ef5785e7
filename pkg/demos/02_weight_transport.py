"""Which rules read forward weights while building targets, and why SDTP
targets vanish when the output already matches.

    python demos/02_weight_transport.py
"""
import numpy as np

from targetprop.layers import build_network
from targetprop.rules import LearningRule, compute_targets
from targetprop.tensor import SeededRng

WEIGHT_ATTRS = {"W", "b", "params", "full_weights", "transport", "transposed_apply", "forward", "param_grads"}


class Spy:
    """Logs reads of anything that exposes a forward layer's weights."""

    def __init__(self, layer, log, i):
        object.__setattr__(self, "_layer", layer)
        object.__setattr__(self, "_log", log)
        object.__setattr__(self, "_i", i)

    def __getattr__(self, name):
        if name in WEIGHT_ATTRS:
            self._log.append(f"layer{self._i}.{name}")
        return getattr(self._layer, name)


x = SeededRng(1).uniform((4, 28, 28, 1))
q = np.eye(10)[[3, 1, 4, 1]]
print("Forward-weight reads during target computation on mnist_lc:")
for kind, z in (("dtp", 0), ("sdtp", 0), ("ao_sdtp", 16), ("hybrid", 0)):
    net = build_network("mnist_lc", SeededRng(0), aux_size=z)
    tape = net.forward(x)
    log = []
    net.layers = [Spy(layer, log, i) for i, layer in enumerate(net.layers)]
    compute_targets(net, LearningRule(kind, z_size=z, alpha_mix=0.5), tape, q)
    print(f"  {kind:8s} {len(log):3d} reads  {sorted(set(log))}")

print("\nDTP steps the penultimate layer along the exact output gradient, so it")
print("touches the output weights once. SDTP and AO-SDTP start from the loss")
print("minimiser and only ever call the learned inverses. The hybrid rule mixes")
print("in BP steps and reads the weights above every hidden layer.\n")

net = build_network("mnist_fc", SeededRng(0))
tape = net.forward(x)
print("Difference targets when the output target equals the realised output:")
for kind in ("tp", "dtp", "sdtp"):
    t = compute_targets(net, LearningRule(kind), tape, tape.output)
    gap = max(np.max(np.abs(t[l] - tape.activations[l])) for l in range(1, len(net.layers)))
    print(f"  {kind:5s} max |target - h| = {gap:.3g}")
print("Vanilla TP has no correction term, so untrained inverses leave a gap.")
