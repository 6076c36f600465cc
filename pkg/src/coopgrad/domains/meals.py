"""A correlated joint action distribution no factored controller can express.

Two binary action components: a drink {vodka, milk} and a food {pickles,
cereal}.  The target mixes the two sensible meals — 10% (vodka, pickles),
90% (milk, cereal) — with zero mass on the cross terms.  Any product of
independent per-component distributions that assigns positive probability to
both meals must also assign positive probability to the cross terms, so the
target is unreachable; ``analysis.factored_gap`` measures the distance.
"""

import numpy as np

VODKA, MILK = 0, 1
PICKLES, CEREAL = 0, 1


def meal_target_distribution() -> np.ndarray:
    """2x2 joint distribution, rows = drink, columns = food."""
    target = np.zeros((2, 2))
    target[VODKA, PICKLES] = 0.1
    target[MILK, CEREAL] = 0.9
    return target
