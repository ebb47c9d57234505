"""Why the adversarial stage works: the discriminator estimates a density ratio.

Train the sequence discriminator on two hand-built distributions over a tiny
enumerable support of displacement sequences. The two-label log loss has a
known exact optimum at every support point x:

    D*(x) = p_teacher(x) / (p_teacher(x) + p_agent(x))

so a correctly trained discriminator is a density-ratio meter, and
log D(agent sequence) is exactly the signal the policy needs to move its
sequence distribution toward the teacher's. Watch the learned D converge to
the oracle on all four support points.

Run:  python3 demos/05_density_ratio_discriminator.py
"""

import math

import numpy as np

from ilfo import autodiff as ad
from ilfo.evaluation import optimal_discriminator_oracle
from ilfo.models import DiscriminatorNet


def population_loss(disc, support, p_teacher, p_agent):
    """Exact expected paired loss over the enumerable support."""
    terms = []
    for i, seq in enumerate(support):
        z = disc.forward_logit(seq, train_mode=False)
        terms.append(ad.scale(ad.softplus(ad.scale(z, -1.0)), float(p_teacher[i])))
        terms.append(ad.scale(ad.softplus(z), float(p_agent[i])))
    loss = terms[0]
    for term in terms[1:]:
        loss = ad.add(loss, term)
    return loss


def d_value(disc, seq) -> float:
    z = float(disc.forward_logit(seq, train_mode=False).data)
    return 1.0 / (1.0 + math.exp(-z))


def main():
    # four sequence "shapes": constant displacement at one of four levels.
    # the teacher favors small displacements, the agent large ones.
    levels = [0.2, 0.6, 1.2, 2.0]
    support = [lvl * np.ones((4, 2)) for lvl in levels]
    p_teacher = np.array([0.5, 0.3, 0.15, 0.05])
    p_agent = p_teacher[::-1].copy()
    oracle = [optimal_discriminator_oracle(p_teacher[i], p_agent[i]) for i in range(4)]

    # the loss the training loop cannot go below: plug D* into the objective
    floor = -sum(
        p_teacher[i] * math.log(oracle[i]) + p_agent[i] * math.log(1.0 - oracle[i])
        for i in range(4)
    )

    disc = DiscriminatorNet(
        2, lstm_hidden=12, lstm_layers=1, head_hidden=16, dropout_p=0.0, seed=1
    )
    adam = ad.AdamState(disc.params)

    print("== training on the exact population loss ==")
    print(f"theoretical minimum loss = {floor:.4f}")
    for step in range(1, 401):
        loss = population_loss(disc, support, p_teacher, p_agent)
        ad.adam_step(disc.params, ad.backward(loss), adam, 1e-2)
        if step in (1, 50, 100, 200, 400):
            print(f"step {step:>3}: loss = {float(loss.data):.4f}")

    print("\n== learned D vs the density-ratio oracle ==")
    print(f"{'level':>6} {'p_teacher':>9} {'p_agent':>8} {'D*':>7} "
          f"{'learned D':>9} {'|error|':>8}")
    worst = 0.0
    for i, seq in enumerate(support):
        d = d_value(disc, seq)
        err = abs(d - oracle[i])
        worst = max(worst, err)
        print(f"{levels[i]:>6.1f} {p_teacher[i]:>9.2f} {p_agent[i]:>8.2f} "
              f"{oracle[i]:>7.4f} {d:>9.4f} {err:>8.4f}")
    print(f"\nworst absolute error: {worst:.4f}")

    print("\n== sanity checks on the oracle itself ==")
    print(f"teacher-only mass:   D* = {optimal_discriminator_oracle(0.3, 0.0):.1f}")
    print(f"agent-only mass:     D* = {optimal_discriminator_oracle(0.0, 0.3):.1f}")
    print(f"equal mass:          D* = {optimal_discriminator_oracle(0.2, 0.2):.1f} "
          f"(the indifference point of the adversarial stage)")


if __name__ == "__main__":
    main()
