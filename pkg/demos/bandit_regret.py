"""EXP-IX on a Bernoulli bandit: realized regret against the theory bound.

Runs the single-agent learner on a 10-arm instance where one arm is
clearly best and prints how the average regret scales as the horizon
grows. The O(sqrt(K T ln K)) shape shows up as roughly sqrt(10)x regret
per 10x horizon.
"""

import math

import numpy as np

from equilearn.bandit import regret, run_exp_ix

K = 10
MEANS = np.array([0.4] + [0.6] * (K - 1))   # arm 0 is best


def loss_fn(t, rng):
    return (rng.random(K) < MEANS).astype(float)


def main():
    print(f"{K}-arm Bernoulli bandit, best arm mean loss {MEANS.min()}")
    print(f"{'T':>8} {'mean regret':>12} {'bound':>10} {'regret/T':>9}")
    for rounds in (1_000, 10_000, 100_000):
        runs = [regret(run_exp_ix(loss_fn, K, rounds,
                                  np.random.default_rng(seed)))
                for seed in range(10)]
        bound = 4.0 * math.sqrt(2.0 * K * rounds * math.log(K))
        mean = float(np.mean(runs))
        print(f"{rounds:>8} {mean:>12.1f} {bound:>10.1f} "
              f"{mean / rounds:>9.4f}")


if __name__ == "__main__":
    main()
