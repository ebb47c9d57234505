"""Stage 1 end to end: learn to act by reproducing observed state changes.

The teacher dataset is state-only. Each epoch alternates two updates:

  1. policy epoch   - the policy proposes an action for each teacher state
                      and is pushed through the *frozen* state-transition
                      generator toward the teacher's observed next state;
  2. generator epoch - the policy is frozen, fresh rollouts of it are
                      collected in the real environment, and the generator
                      fits those (state, action) -> next-state transitions.

Neither network ever sees a teacher action. Run a small version and watch
both losses fall together.

Run:  python3 demos/03_reconstruction_training.py
"""

import numpy as np

from ilfo import envs
from ilfo import training as tr
from ilfo.evaluation import aer, performance


def main():
    config = tr.ExperimentConfig(
        n_teacher_trajectories=30,
        epochs_a=1,  # unused: this demo stops after stage 1
        master_seed=0,
    )
    config.validate()
    spec = envs.get_spec(config.env_name, horizon=config.horizon)
    print(f"environment: {config.env_name}, "
          f"{config.n_teacher_trajectories} state-only teacher trajectories, "
          f"{config.epochs_r} reconstruction epochs")

    result = tr.train(config, stage1_only=True)

    print("\n== training curves (every 20th epoch) ==")
    print(f"{'epoch':>5} {'policy_loss':>12} {'gen_train':>10} "
          f"{'gen_heldout':>11} {'probe_AER':>10}")
    records = result.log.stage_records("reconstruction")
    for rec in records:
        if rec.epoch % 20 == 0 or rec.epoch == len(records) - 1:
            print(f"{rec.epoch:>5} {rec.policy_loss:>12.4f} "
                  f"{rec.gen_loss_train:>10.4f} {rec.gen_loss_eval:>11.4f} "
                  f"{rec.aer_probe:>10.3f}")

    first, last = records[0], records[-1]
    print(f"\npolicy loss fell {first.policy_loss:.3f} -> {last.policy_loss:.3f}")
    print(f"held-out generator loss fell {first.gen_loss_eval:.4f} -> "
          f"{last.gen_loss_eval:.4f}")
    print(f"probe AER rose {first.aer_probe:.3f} -> {last.aer_probe:.3f}")

    print("\n== where the policy landed ==")
    seeds = list(range(5000, 5030))
    t_mean, _ = aer(envs.teacher_policy(spec), spec, seeds)
    r_mean, _ = aer(envs.random_policy(spec, seed=0), spec, seeds)
    a_mean, a_std = aer(result.policy.act, spec, seeds)
    print(f"teacher AER {t_mean:9.4f}   random AER {r_mean:9.4f}")
    print(f"policy  AER {a_mean:9.4f} +/- {a_std:.4f}")
    print(f"performance = {performance(a_mean, r_mean, t_mean):.4f} "
          f"(0 = random, 1 = teacher)")

    print("\n== the generator is a faithful model of the dynamics ==")
    # score it on transitions it never trained on: fresh policy rollouts
    errs = []
    for seed in range(900_000, 900_010):
        traj = envs.rollout(spec, result.policy.act, seed, record_actions=True)
        pred = result.generator.predict(traj.states[:-1], traj.actions)
        errs.append(np.mean((pred - traj.states[1:]) ** 2))
    rms = float(np.sqrt(np.mean(errs)))
    print(f"next-state RMS error on 10 fresh rollouts: {rms:.5f}")


if __name__ == "__main__":
    main()
