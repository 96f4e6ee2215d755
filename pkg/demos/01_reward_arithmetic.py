"""How the reward components combine, and why advantages skip std scaling.

Run: python3 demos/01_reward_arithmetic.py
"""

from fractions import Fraction

from rewardspec.model import TernaryLabel as L
from rewardspec.reward import VARIANTS, AlphaSchedule, alpha_at, group_advantages, hybrid_reward, rubric_score, variant_reward

# A three-criterion rubric judged yes / part / no.
s_r = rubric_score([L.YES, L.PART, L.NO], [3, 2, 1])
print(f"rubric score: {s_r:.4f}  (weighted mean of 1, 0.5, 0)")

# Checkers passed 4 of 5, the holistic judge said 9/10.
s_c, s_g = 0.8, 0.9
for step in (0, 200, 400, 800, 1200):
    a = alpha_at(step, AlphaSchedule.linear(800))
    print(f"step {step:>4}: alpha={a:.2f}  reward={hybrid_reward(s_r, s_g=s_g, s_c=s_c, n=5, alpha=a):.4f}")

# With no usable checker the code term drops out of numerator and denominator.
print(f"no checkers, alpha=1: {hybrid_reward(s_r, s_g=s_g, s_c=None, n=0):.4f}")

print("\nablation variants on the same components:")
for v in VARIANTS:
    print(f"  {v:<6} {variant_reward(v, s_r=s_r, s_c=s_c, s_g=s_g):.4f}")

# A clear winner and a near-tie keep their scale difference after centring.
big = group_advantages([Fraction(0), Fraction(1, 2), Fraction(1)])
near = group_advantages([Fraction(45, 100), Fraction(1, 2), Fraction(55, 100)])
print(f"\nadvantages, decisive group: {[float(x) for x in big]}")
print(f"advantages, near-tie group: {[float(x) for x in near]}")
print(f"magnitude ratio: {max(map(abs, big)) / max(map(abs, near))}")
