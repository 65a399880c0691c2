"""Check the hand-written backward pass against finite differences.

Run:  python demos/gradient_check.py

The loss is piecewise linear (absolute error, ReLU, L1 on activations), so
central differences are exact away from kinks; models whose batch lands
near a kink are redrawn.  A deliberately broken gradient is included to
show what a failure looks like.
"""

from aedetect import autoencoder as ae

for d in (2, 5, 10):
    for lam in (0.0, 1e-4):
        rep = ae.gradient_check(d, 10 * d, trials=5, l1_lambda=lam, seed=d)
        print(f"d={d:2d} h={10 * d:3d} lambda={lam:g}: max relative error {rep.max_rel_error:.1e} "
              f"({rep.resampled} redraws) {'ok' if rep.passed else 'FAILED'}")


def broken(model, X, lam):
    grads = ae.backward(model, X, lam)
    grads["b1"] = grads["b1"] * 1.01
    return grads


rep = ae.gradient_check(5, 50, trials=3, grad_fn=broken)
print(f"broken b1 gradient: max relative error {rep.max_rel_error:.1e} {'ok' if rep.passed else 'FAILED'}")
