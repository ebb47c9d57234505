"""A tour of the built-in environments: dynamics, teachers, baselines.

Run:  python3 demos/02_environments.py
"""

import numpy as np

from ilfo import envs
from ilfo.evaluation import aer, performance


def main():
    print("== registered environments ==")
    header = f"{'name':<20} {'state':>5} {'action':>6} {'dt':>6} {'horizon':>7}  state_scale"
    print(header)
    print("-" * len(header))
    for name in envs.env_names():
        spec = envs.get_spec(name)
        print(
            f"{spec.name:<20} {spec.state_dim:>5} {spec.action_dim:>6} "
            f"{spec.dt:>6.2f} {spec.horizon:>7}  {spec.state_scale}"
        )

    print("\n== teacher vs random actions, 20 evaluation seeds each ==")
    seeds = list(range(300, 320))
    for name in envs.env_names():
        spec = envs.get_spec(name)
        t_mean, t_std = aer(envs.teacher_policy(spec), spec, seeds)
        r_mean, r_std = aer(envs.random_policy(spec, seed=0), spec, seeds)
        print(f"{name}:")
        print(f"  teacher AER {t_mean:10.4f} +/- {t_std:.4f}")
        print(f"  random  AER {r_mean:10.4f} +/- {r_std:.4f}")
        # performance rescales so the random baseline is 0 and the teacher 1
        print(f"  performance(teacher) = {performance(t_mean, r_mean, t_mean):.1f}, "
              f"performance(random) = {performance(r_mean, r_mean, t_mean):.1f}")

    print("\n== double-integrator failure bound ==")
    # a constant full push accelerates without limit; the episode must end
    # early once the position leaves the radius-10 disc
    spec = envs.get_spec("double-integrator")
    runaway = envs.rollout(spec, lambda vec: np.array([1.0, 1.0]), seed=7)
    last = runaway.states[-1]
    print(f"constant [1, 1] action: episode ended after "
          f"{len(runaway.states) - 1} steps (horizon {spec.horizon})")
    print(f"final position radius = {np.linalg.norm(last[:2]):.3f} "
          f"(failure disc radius 10)")
    steered = envs.rollout(spec, envs.teacher_policy(spec), seed=7)
    print(f"teacher from the same seed: {len(steered.states) - 1} steps, "
          f"final radius {np.linalg.norm(steered.states[-1][:2]):.3f}")

    print("\n== pendulum episodes always run to the horizon ==")
    spec = envs.get_spec("pendulum")
    wild = envs.rollout(spec, envs.random_policy(spec, seed=3), seed=11)
    print(f"random policy: {len(wild.states) - 1} steps; speed stays within "
          f"[{wild.states[:, 2].min():.2f}, {wild.states[:, 2].max():.2f}] "
          f"(clamped to +/-8)")
    swing = envs.rollout(spec, envs.teacher_policy(spec), seed=11)
    upright = swing.states[:, 0]  # cos(theta), 1 means pointing up
    print(f"teacher swing-up: cos(theta) starts at {upright[0]:.3f}, "
          f"ends at {upright[-1]:.3f} (1.0 is upright)")

    print("\n== rollouts are deterministic in the seed ==")
    a = envs.rollout(spec, envs.teacher_policy(spec), seed=42)
    b = envs.rollout(spec, envs.teacher_policy(spec), seed=42)
    c = envs.rollout(spec, envs.teacher_policy(spec), seed=43)
    print(f"same seed, bitwise-equal states: {np.array_equal(a.states, b.states)}")
    print(f"different seed, different start: "
          f"{not np.allclose(a.states[0], c.states[0])}")


if __name__ == "__main__":
    main()
