"""numba-compiled implementation of the enumeration kernels."""

import numpy as np
from numba import njit


@njit(cache=True)
def propagate(exo_cards, endo_cards, order, par_ptr, par_src, par_card, tab_ptr, tables, forced):
    n_endo = endo_cards.shape[0]
    n_exo = exo_cards.shape[0]
    n_u = 1
    for e in range(n_exo):
        n_u *= exo_cards[e]
    out = np.empty(n_u, dtype=np.int64)
    vals = np.zeros(n_endo + n_exo, dtype=np.int64)
    for i in range(n_endo):
        if forced[i] >= 0:
            vals[i] = forced[i]
    # Only mechanisms that are not forced need evaluating.
    live = np.empty(n_endo, dtype=np.int64)
    n_live = 0
    for k in range(n_endo):
        if forced[order[k]] < 0:
            live[n_live] = order[k]
            n_live += 1
    for u in range(n_u):
        for k in range(n_live):
            i = live[k]
            idx = 0
            for p in range(par_ptr[i], par_ptr[i + 1]):
                idx = idx * par_card[p] + vals[par_src[p]]
            vals[i] = tables[tab_ptr[i] + idx]
        flat = 0
        for i in range(n_endo):
            flat = flat * endo_cards[i] + vals[i]
        out[u] = flat
        # Odometer step over the exogenous digits, last variable fastest.
        e = n_exo - 1
        while e >= 0:
            vals[n_endo + e] += 1
            if vals[n_endo + e] < exo_cards[e]:
                break
            vals[n_endo + e] = 0
            e -= 1
    return out
