"""numpy implementations of the aggregation kernels.

`netquant._backend` exposes these when the compiled extension is absent.
Both backends must agree bitwise. The fixed-point accumulation in
`neighbor_sum` is what makes embeddings invariant to neighbor order:
integer addition is associative, float addition is not.
"""

import numpy as np

# Fixed-point grid for neighbor accumulation. Reservoir states live in
# (-1, 1), so 47 fractional bits leave 16 integer bits of headroom: the
# int64 accumulator cannot overflow for degrees up to 65536.
FIXED_POINT_SCALE = 2.0 ** 47


def _csr_arrays(indptr, indices):
    return (
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
    )


def neighbor_sum(indptr, indices, state):
    """Sum rows of `state` over each node's neighbor list.

    Rows are snapped to a fixed-point grid and accumulated in int64, so the
    result does not depend on the order neighbors are visited in.
    """
    indptr, indices = _csr_arrays(indptr, indices)
    state = np.ascontiguousarray(state, dtype=np.float64)
    quantized = np.rint(state * FIXED_POINT_SCALE).astype(np.int64)
    n = indptr.shape[0] - 1
    if indices.shape[0] == 0:
        return np.zeros((n, state.shape[1]))
    gathered = quantized[indices]
    starts = indptr[:-1]
    # rows starting at len(indices) are empty tails; reduceat cannot take
    # them, and dropping them (rather than clamping) keeps every remaining
    # segment boundary correct
    in_bounds = starts < indices.shape[0]
    totals = np.zeros((n, state.shape[1]), dtype=np.int64)
    totals[in_bounds] = np.add.reduceat(gathered, starts[in_bounds], axis=0)
    # an empty row between nonempty ones makes reduceat return the single
    # element at its start
    totals[indptr[1:] == indptr[:-1]] = 0
    return totals.astype(np.float64) / FIXED_POINT_SCALE


def spmv(indptr, indices, vector):
    """Multiply the implicit 0/1 adjacency matrix by `vector`.

    Entries must lie in [-1, 1]; sums run on the same fixed-point grid as
    `neighbor_sum` so both backends agree bitwise.
    """
    indptr, indices = _csr_arrays(indptr, indices)
    vector = np.ascontiguousarray(vector, dtype=np.float64)
    if vector.size and np.max(np.abs(vector)) > 1.0:
        raise ValueError("spmv entries must lie in [-1, 1]")
    n = indptr.shape[0] - 1
    if indices.shape[0] == 0:
        return np.zeros(n)
    quantized = np.rint(vector * FIXED_POINT_SCALE).astype(np.int64)
    gathered = quantized[indices]
    starts = indptr[:-1]
    in_bounds = starts < indices.shape[0]
    totals = np.zeros(n, dtype=np.int64)
    totals[in_bounds] = np.add.reduceat(gathered, starts[in_bounds])
    totals[indptr[1:] == indptr[:-1]] = 0
    return totals.astype(np.float64) / FIXED_POINT_SCALE
