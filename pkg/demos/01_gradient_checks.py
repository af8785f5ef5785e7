"""Walk through the finite-difference checks and the FA/BP sanity case.

    python demos/01_gradient_checks.py
"""
import numpy as np

from targetprop import gradcheck
from targetprop.layers import build_network
from targetprop.rules import bp_backward, fa_backward, task_delta
from targetprop.tensor import SeededRng

print("Central differences (step 1e-5) on a 4-6-3 tanh/softmax net.")
print("Each number is the worst block relative error over five seeds.\n")
for name in gradcheck.CHECKS:
    worst = max(max(gradcheck.run_check(name, s).values()) for s in range(5))
    print(f"  {name:16s} {worst:.2e}   (limit {gradcheck.threshold_for(name):.0e})")

print("\nThe 'hybrid' row compares against BP rather than finite differences:")
print("with alpha_mix = 1 the layer-local loss has exactly the BP gradient.\n")

# Feedback alignment reduces to BP once B is set to the forward transposes.
net = build_network(gradcheck.tiny_arch((5, 7, 6, 4)), SeededRng(0), feedback="fa")
x = SeededRng(1).standard_normal((8, 5))
q = np.eye(4)[SeededRng(2).integers(4, (8,))]
tape = net.forward(x)
e = task_delta(net, tape.output, q)
random_fb = fa_backward(net, tape, e)
for i in range(1, len(net.layers)):
    net.feedback["B"][i] = net.layers[i].W.T.copy()
aligned = fa_backward(net, tape, e)
exact = bp_backward(net, tape, e)
diff_random = max(np.max(np.abs(a["W"] - b["W"])) for a, b in zip(random_fb, exact))
same = all(np.array_equal(a[k], b[k]) for a, b in zip(aligned, exact) for k in a)
print(f"FA with random B, max |dW - dW_bp| = {diff_random:.3f}")
print(f"FA with B = W.T, bitwise equal to BP: {same}")
