"""How each reward-shaping strategy treats a stream of actives from one scaffold.

Twenty-eight distinct molecules share the cyclohexane scaffold. They arrive
in batches of four, all with extrinsic reward 1.0, and we print what each
strategy hands back to the learner.

    python3 demos/shaping_walkthrough.py
"""

import numpy as np

from divmol.shaping import ScaffoldMemory, ShapingParams, klucb_solve, shape_batch

STRATEGIES = ("none", "ims", "erf_ims", "lin_ims", "sig_ims", "tanh_ims", "kl_ucb", "inf", "min_dis")


def bucket_stream(n=28):
    return [f"C1CCCCC1{'C' * k}O" for k in range(n)]


def main():
    params = ShapingParams()
    mols = bucket_stream()
    print(f"bucket size m = {params.m}, active threshold h = {params.h}\n")
    print(f"{'strategy':<10}" + "".join(f"{f'#{i + 1}-{i + 4}':>16}" for i in range(0, len(mols), 4)))
    for strategy in STRATEGIES:
        memory = ScaffoldMemory()
        cells = []
        for lo in range(0, len(mols), 4):
            res = shape_batch(strategy, params, memory, mols[lo:lo + 4], [1.0] * 4,
                              rng=np.random.default_rng(0))
            cells.append(f"{res.shaped.mean():16.3f}")
        print(f"{strategy:<10}" + "".join(cells))

    print("\nMean shaped reward per batch. The penalties fade the bucket out as it fills,")
    print("each with its own curve; IMS drops to zero at the 25th member. MinDis pays")
    print("for fingerprint distance, so near-identical chain extensions earn little.")
    print("KL-UCB and Inf leave this stream alone: every reward is already 1, and a")
    print("memory holding one scaffold carries no information to reward.")

    print("\nKL-UCB optimism shrinks as a scaffold is sampled more often (mean 0.6, n = 10^4):")
    for count in (1, 5, 25, 100, 1000):
        print(f"  N = {count:>5}: upper bound {klucb_solve(0.6, count, 10_000):.4f}")

    print("\nDuplicates are caught on canonical form, whatever the spelling:")
    memory = ScaffoldMemory()
    res = shape_batch("none", params, memory, ["OC1CCCCC1", "C1CCCCC1O", "C1CCC(O)CC1"], [0.9] * 3)
    print(f"  shaped {[float(x) for x in res.shaped]}, duplicate flags {[bool(x) for x in res.duplicate]}")


if __name__ == "__main__":
    main()
