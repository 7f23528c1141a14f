# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled exhaustive-search kernel for the brute-force oracle.

Scans all assignment codes in increasing order and keeps the first code
attaining the maximum satisfied-constraint count (codes are ordered so that
this is the lexicographically smallest maximiser).
"""

def search_best(unsigned long long num_assignments,
                int m,
                int[:] var_pos,
                long long[:] var_off,
                unsigned char[:] tables,
                long long[:] table_off):
    cdef unsigned long long x, best_code = 0
    cdef long long best_count = -1
    cdef int count, j, q
    cdef long long idx
    cdef long long voff, toff, u
    for x in range(num_assignments):
        count = 0
        for j in range(m):
            voff = var_off[j]
            u = var_off[j + 1] - voff
            idx = 0
            for q in range(u):
                idx |= ((x >> var_pos[voff + q]) & 1) << q
            count += tables[table_off[j] + idx]
        if count > best_count:
            best_count = count
            best_code = x
    return best_count, best_code
