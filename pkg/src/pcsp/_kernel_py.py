"""Pure numpy fallback for the exhaustive-search kernel.

Same contract as the compiled pcsp._kernel: scan assignment codes in
increasing order, return (best satisfied count, first code attaining it).
"""

from __future__ import annotations

import numpy as np

_CHUNK = 1 << 18


def search_best(num_assignments, m, var_pos, var_off, tables, table_off):
    best_count = -1
    best_code = 0
    for start in range(0, num_assignments, _CHUNK):
        stop = min(start + _CHUNK, num_assignments)
        codes = np.arange(start, stop, dtype=np.uint64)
        counts = np.zeros(stop - start, dtype=np.int32)
        for j in range(m):
            pos = var_pos[var_off[j]:var_off[j + 1]]
            idx = np.zeros(stop - start, dtype=np.int64)
            for q, p in enumerate(pos):
                idx |= ((codes >> np.uint64(p)) & np.uint64(1)).astype(np.int64) << q
            counts += tables[table_off[j]:table_off[j + 1]][idx]
        c = int(counts.max())
        if c > best_count:
            best_count = c
            best_code = start + int(np.argmax(counts))  # argmax returns first hit
    return best_count, best_code
