"""Dense two-phase tableau simplex for small linear programs in standard form.

    minimize  c @ x   subject to  A @ x = b,  x >= 0
"""

import numpy as np


class LinearProgramError(RuntimeError):
    pass


class InfeasibleError(LinearProgramError):
    pass


class UnboundedError(LinearProgramError):
    pass


_TOL = 1e-10


def _pivot(T, row, col):
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _run(T, basis, n_cols, max_iter, bland_after):
    """Iterate on tableau ``T`` (last row = reduced costs, last column = rhs)."""
    stall = 0
    last_obj = None
    for it in range(max_iter):
        reduced = T[-1, :n_cols]
        use_bland = stall >= bland_after
        if use_bland:
            candidates = np.flatnonzero(reduced < -_TOL)
            if candidates.size == 0:
                return it
            col = int(candidates[0])
        else:
            col = int(np.argmin(reduced))
            if reduced[col] >= -_TOL:
                return it
        column = T[:-1, col]
        positive = column > _TOL
        if not positive.any():
            raise UnboundedError("objective is unbounded below")
        ratios = np.full(column.shape, np.inf)
        ratios[positive] = T[:-1, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + _TOL * max(1.0, abs(best)))
        row = int(ties[np.argmin(np.asarray(basis)[ties])])
        _pivot(T, row, col)
        basis[row] = col
        obj = T[-1, -1]
        if last_obj is not None and abs(obj - last_obj) <= _TOL * max(1.0, abs(obj)):
            stall += 1
        else:
            stall = 0
        last_obj = obj
    raise LinearProgramError(f"simplex did not converge in {max_iter} iterations")


def simplex(c, A, b, max_iter=50_000, bland_after=50):
    """Solve a standard-form LP; returns ``(x, objective)``.

    Phase one introduces artificial variables only for rows that lack a
    ready-made unit column, then drives them out of the basis. Dantzig's
    rule is used until the objective stalls, after which Bland's rule
    guarantees termination on degenerate problems.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    m_rows, n_vars = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    basis = [-1] * m_rows
    for j in range(n_vars):
        col = A[:, j]
        nz = np.flatnonzero(np.abs(col) > 0)
        if nz.size == 1 and abs(col[nz[0]] - 1.0) == 0.0 and basis[nz[0]] < 0:
            basis[nz[0]] = j
    missing = [i for i in range(m_rows) if basis[i] < 0]
    n_art = len(missing)
    n_cols = n_vars + n_art

    T = np.zeros((m_rows + 1, n_cols + 1))
    T[:-1, :n_vars] = A
    T[:-1, -1] = b
    for k, i in enumerate(missing):
        T[i, n_vars + k] = 1.0
        basis[i] = n_vars + k

    if n_art:
        T[-1, n_vars:n_cols] = 1.0
        for i in missing:
            T[-1] -= T[i]
        _run(T, basis, n_cols, max_iter, bland_after)
        if -T[-1, -1] > 1e-8 * max(1.0, np.abs(b).max()):
            raise InfeasibleError("linear program is infeasible")
        # Drive zero-level artificials out of the basis where possible.
        for i in range(m_rows):
            if basis[i] >= n_vars:
                row = T[i, :n_vars]
                cand = np.flatnonzero(np.abs(row) > 1e-9)
                if cand.size:
                    _pivot(T, i, int(cand[0]))
                    basis[i] = int(cand[0])
        keep_rows = [i for i in range(m_rows) if basis[i] < n_vars]
        T = np.vstack([T[keep_rows], T[-1:]])
        basis = [basis[i] for i in keep_rows]
        T = np.delete(T, np.s_[n_vars:n_cols], axis=1)

    T[-1, :] = 0.0
    T[-1, :n_vars] = c
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    _run(T, basis, n_vars, max_iter, bland_after)

    x = np.zeros(n_vars)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    x = np.maximum(x, 0.0)
    return x, float(c @ x)
