"""A tour of the autodiff engine: graphs, gradients, Adam, checkpoints.

Run:  python3 demos/01_autodiff_basics.py
"""

import numpy as np

from ilfo import autodiff as ad
from ilfo.evaluation import finite_difference_gradient


def main():
    print("== building a graph and differentiating it ==")
    params = ad.ParameterSet()
    params.add("w", np.array([[0.4, -0.3], [0.2, 0.1]]))
    params.add("b", np.array([0.05, -0.05]))
    x = np.array([[1.0, 2.0], [0.5, -1.0], [2.0, 0.0]])

    def loss_value():
        h = ad.tanh(ad.add(ad.matmul(ad.Value(x), params.value("w")), params.value("b")))
        return ad.mean_all(ad.square(h))

    loss = loss_value()
    print(f"loss = {float(loss.data):.6f}")
    grads = ad.backward(loss)
    for name, g in grads.items():
        print(f"d loss / d {name}:\n{np.round(g, 6)}")

    print("\n== cross-checking against central finite differences ==")
    numeric = finite_difference_gradient(lambda p: loss_value(), params)
    for name in grads:
        err = np.abs(grads[name] - numeric[name]).max()
        print(f"{name}: max abs difference vs finite differences = {err:.2e}")

    print("\n== one parameter used by two forward passes ==")
    # both contributions must sum: d(3w + 5w)/dw = 8
    two = ad.ParameterSet()
    two.add("w", np.array([2.0]))
    a = ad.scale(two.value("w"), 3.0)
    b = ad.scale(two.value("w"), 5.0)
    g = ad.backward(ad.sum_all(ad.add(a, b)))["w"][0]
    print(f"d(3w + 5w)/dw = {g} (expect 8)")

    print("\n== Adam with gradient clipping on a quadratic ==")
    quad = ad.ParameterSet()
    quad.add("theta", np.array([4.0, -3.0]))
    adam = ad.AdamState(quad)
    for step in range(1, 201):
        theta = quad.value("theta")
        loss = ad.sum_all(ad.square(theta))
        grads = ad.clip_gradients(ad.backward(loss), 1.0)
        ad.adam_step(quad, grads, adam, 0.05)
        if step in (1, 50, 100, 200):
            print(f"step {step:3d}: theta = {np.round(quad.data('theta'), 5)}, "
                  f"loss = {float(loss.data):.6f}")

    print("\n== checkpoint round trip ==")
    path = "/tmp/autodiff_demo.ckpt"
    ad.save_checkpoint(path, quad, adam=adam)
    restored, restored_adam = ad.load_checkpoint(path)
    print(f"restored theta bitwise equal: "
          f"{np.array_equal(restored.data('theta'), quad.data('theta'))}")
    print(f"restored Adam step count: {restored_adam.t} (expect {adam.t})")


if __name__ == "__main__":
    main()
