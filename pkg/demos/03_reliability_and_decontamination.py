"""Offline diagnostics: reward reliability under rescoring, and prompt decontamination.

Run: python3 demos/03_reliability_and_decontamination.py
"""

import random

from rewardspec.harness import (
    ReliabilityGroup,
    advantage_sign_flip_rate,
    containment,
    decontaminate,
    discordant_inversion_rate,
    top1_exact_pass,
)


def noisy_groups(noise: float, n: int = 40) -> list[ReliabilityGroup]:
    """Reward tracks the checker pass fraction plus judge noise of the given size.

    The pass patterns are the same at every noise level; only the noise varies.
    """
    patterns, rng = random.Random(0), random.Random(1)
    groups = []
    for g in range(n):
        passes = [tuple(patterns.random() < 0.6 for _ in range(3)) for _ in range(4)]
        base = [sum(p) / 3 for p in passes]
        runs = [tuple(b + rng.uniform(-noise, noise) for b in base) for _ in range(3)]
        groups.append(ReliabilityGroup(f"p{g}", passes, runs))
    return groups


print("noise  top1-exact-pass  inversion  sign-flip")
for noise in (0.0, 0.1, 0.3, 0.6):
    gs = noisy_groups(noise)
    print(f"{noise:>5}  {top1_exact_pass(gs):>15.3f}  {discordant_inversion_rate(gs):>9.3f}  "
          f"{advantage_sign_flip_rate(gs):>9.3f}")

bench = ['Summarize the plot of "The Glass Lighthouse" in under 100 words, focusing on the keeper and the storm']
train = [
    bench[0],
    'Summarize the plot of "The Glass Lighthouse" in under 100 words, focusing on the ending',
    "Summarize the plot of a novel you like in under 100 words",
    "List three uses of copper.",
]
print(f"\ncontainment of the near copy: {containment(train[1], bench[0]):.2f}")
kept, report = decontaminate(train, {"bench": bench})
print(f"kept: {[r.text[:40] for r in kept]}")
print({k: report[k] for k in ("total", "clean", "removed", "per_benchmark")})
for item in report["removed_items"]:
    print(f"  removed #{item['index']} via {item['rule']}")
