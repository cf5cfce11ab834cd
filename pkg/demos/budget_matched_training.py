"""Four training loops, one real-environment budget.

Every method gets the same number of real reward evaluations on the
same task; methods that spend evaluations on counterfactual replays
afford fewer outer iterations. The script trains a six-agent team from
a concentrated start and prints how far each method drives the exact
normalized regret.

Run from the repository root after installing:

    python demos/budget_matched_training.py
"""

import numpy as np

from seqcredit import (
    TrainConfig,
    init_policy,
    optimal_value,
    regret_auc,
    run_method,
    sample_reward_model,
    uniform_value,
)

K, A = 6, 4
LAMBDA_INT = 0.5
RHO = 2.0
SEED = 11
ANCHOR_ITERATIONS = 25


def main():
    model = sample_reward_model(SEED, K=K, A=A, lambda_int=LAMBDA_INT, sigma=0.5)
    policy0 = init_policy(SEED, K=K, A=A, rho=RHO)
    value_cache = (optimal_value(model), uniform_value(model))

    # anchor the shared budget to the replay-heavy method so it gets a
    # fixed number of iterations and everyone else absorbs the savings
    anchor = TrainConfig(method="c3", N=32, M_c3=2)
    budget = ANCHOR_ITERATIONS * anchor.iteration_cost(K)

    print(f"task: K={K} agents, interaction {LAMBDA_INT}, start concentration rho={RHO}")
    print(f"shared real-environment budget: {budget} reward evaluations")
    print()
    print(f"{'method':>12} {'iterations':>11} {'mean regret':>12} {'final regret':>13}")

    for method in ("capo", "capo_direct", "magrpo", "hagrpo", "c3"):
        tc = TrainConfig(method=method, N=32, L=64, M=4, eta=0.3, ridge_lambda=0.1, M_c3=2)
        rng = np.random.default_rng(SEED)
        trace = run_method(method, model, policy0, budget, tc, rng, value_cache)
        print(
            f"{method:>12} {trace.iterations:>11} {regret_auc(trace):>12.4f} "
            f"{trace.regrets[-1]:>13.4f}"
        )

    print()
    print("regret is measured exactly on the enumerable task, normalized so")
    print("1 is the uniform policy and 0 is the best joint action. From a")
    print("concentrated start the counterfactual advantage pays for itself;")
    print("the replay method spends most of its budget re-evaluating rewards.")


if __name__ == "__main__":
    main()
