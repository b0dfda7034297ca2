"""Vectorized numpy implementation of the enumeration kernels."""

import numpy as np


def propagate(exo_cards, endo_cards, order, par_ptr, par_src, par_card, tab_ptr, tables, forced):
    n_endo = endo_cards.shape[0]
    n_u = int(np.prod(exo_cards)) if exo_cards.shape[0] else 1
    slots = [None] * (n_endo + exo_cards.shape[0])
    if exo_cards.shape[0]:
        exo_vals = np.unravel_index(np.arange(n_u, dtype=np.int64), tuple(exo_cards))
        for e, vals in enumerate(exo_vals):
            slots[n_endo + e] = vals.astype(np.int64, copy=False)
    for i in order:
        if forced[i] >= 0:
            slots[i] = np.full(n_u, forced[i], dtype=np.int64)
            continue
        idx = np.zeros(n_u, dtype=np.int64)
        for p in range(par_ptr[i], par_ptr[i + 1]):
            idx = idx * par_card[p] + slots[par_src[p]]
        slots[i] = tables[tab_ptr[i] + idx]
    flat = np.zeros(n_u, dtype=np.int64)
    for i in range(n_endo):
        flat = flat * endo_cards[i] + slots[i]
    return flat
