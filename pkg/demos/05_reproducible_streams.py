"""
A random stream any language can reproduce
==========================================

Weight init, shuffles, splits and generator noise all come from one small
generator: SplitMix64 seeding into xoshiro256**. The recurrence is written
out in ``pvtgnn.numerics``; these are the first outputs to compare against.
"""

from pvtgnn.numerics import SeededRng

rng = SeededRng(0)
print([rng.next_u64() for _ in range(3)])

rng = SeededRng(12345)
print([rng.next_u64() for _ in range(3)])

# derived draws
rng = SeededRng(1)
print(rng.random(), rng.uniform(-1, 1), rng.normal(), rng.below(10))
print(rng.permutation(10))

# the same seed twice gives the same stream; share seeds, not objects
a, b = SeededRng(99), SeededRng(99)
print(all(a.next_u64() == b.next_u64() for _ in range(1000)))
