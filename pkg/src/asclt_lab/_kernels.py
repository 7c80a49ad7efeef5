"""Compiled inner loops for long orbits."""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def lsv_orbit(x0, n, alpha, burn_in):
    """Rows are orbits x, Tx, ..., T^{n-1}x after burn_in steps from x0[r]."""
    out = np.empty((x0.shape[0], n))
    for r in range(x0.shape[0]):
        x = x0[r]
        for _ in range(burn_in):
            if x < 0.5:
                x = x * (1.0 + (2.0 * x) ** alpha)
            else:
                x = 2.0 * x - 1.0
        for k in range(n):
            out[r, k] = x
            if x < 0.5:
                x = x * (1.0 + (2.0 * x) ** alpha)
            else:
                x = 2.0 * x - 1.0
        x0[r] = x
    return out


@njit(cache=True, nogil=True)
def interval_code_backward(symbols, left, width, tail):
    """u_k = left[a_k] + width[a_k] * u_{k+1}, run backwards from u_L = tail[r]."""
    rows, length = symbols.shape
    out = np.empty((rows, length))
    for r in range(rows):
        u = tail[r]
        for k in range(length - 1, -1, -1):
            a = symbols[r, k]
            u = left[a] + width[a] * u
            out[r, k] = u
    return out


@njit(cache=True, nogil=True)
def kahan_cumsum(values, s0, c0, m0):
    """Compensated running sums S_1..S_n per row and running max |S_j|.

    s0, c0, m0 carry the sum, compensation and max between blocks; they are
    updated in place.
    """
    rows, n = values.shape
    sums = np.empty((rows, n))
    maxes = np.empty((rows, n))
    for r in range(rows):
        s = s0[r]
        c = c0[r]
        m = m0[r]
        for k in range(n):
            # Neumaier variant: robust when |v| > |s|
            v = values[r, k]
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
            tot = s + c
            sums[r, k] = tot
            a = abs(tot)
            if a > m:
                m = a
            maxes[r, k] = m
        s0[r] = s
        c0[r] = c
        m0[r] = m
    return sums, maxes


@njit(cache=True, nogil=True)
def excursions(values, in_y, n_returns):
    """Split one orbit started in Y into first-return excursions.

    values[k] = f(T^k y), in_y[k] = T^k y in Y. Returns per excursion the
    return time, the induced value f_Y and the excursion max of |S_j f|,
    1 <= j <= phi. Stops after n_returns excursions or at the end of data.
    """
    phi = np.empty(n_returns, dtype=np.int64)
    fy = np.empty(n_returns)
    mx = np.empty(n_returns)
    count = 0
    start = 0
    s = 0.0
    c = 0.0
    m = 0.0
    n = values.shape[0]
    for k in range(n):
        v = values[k]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        a = abs(s + c)
        if a > m:
            m = a
        if k + 1 < n and in_y[k + 1]:
            phi[count] = k + 1 - start
            fy[count] = s + c
            mx[count] = m
            count += 1
            if count == n_returns:
                break
            start = k + 1
            s = 0.0
            c = 0.0
            m = 0.0
    return phi[:count], fy[:count], mx[:count]
