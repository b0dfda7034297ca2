"""Small model surgery helpers shared by the tests."""

import numpy as np

from abstraq import Mechanism, Scm


def flip_entry(model: Scm, child: str, row: int = 0) -> Scm:
    """Copy of ``model`` with one mechanism table entry moved to the next value."""
    mechs = []
    for m in model.mechanisms:
        if m.child == child:
            t = np.array(m.table, dtype=np.int64)
            t[row] = (t[row] + 1) % model.card(child)
            m = Mechanism(m.child, m.endo_parents, m.exo_parents, t)
        mechs.append(m)
    return Scm(model.endogenous, model.exogenous, mechs, model.exo_dist)
