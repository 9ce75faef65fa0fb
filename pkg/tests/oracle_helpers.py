"""Exact enumeration oracle for per-cycle violation expectations.

Independent of the closed-form algebra: it enumerates the attempt counts of
the opening and closing updates and the geometric number of update-free
rounds, computing each cycle's violating-slot count directly from the
recorded-age definition (ages ``Z_prev .. Z_prev + U - 1`` over a cycle of
``U`` slots).
"""

from freshcov.analysis import _attempt_pmf_given_success


def enum_violation_expectation(
    v_th_slots: int,
    p_o_prev: float,
    p_o_cur: float,
    p_x: float,
    delta: int,
    tau_r: int,
    tau_prev: int,
    tau_cur: int,
    tol: float = 1e-13,
) -> float:
    """E[violating slots per cycle | mode pair], exact up to a tiny tail."""
    pmf_prev = _attempt_pmf_given_success(p_o_prev, delta)
    pmf_cur = _attempt_pmf_given_success(p_o_cur, delta)
    miss = 1.0 - p_x
    total = 0.0
    y = 1
    prob_y = p_x  # P[Y = y] = p_x * miss^(y-1)
    while True:
        contrib = 0.0
        for c_prev in range(1, delta + 1):
            age_open = 1 + c_prev + tau_prev
            for c_cur in range(1, delta + 1):
                age_close = 1 + c_cur + tau_cur
                cycle = y * tau_r + age_close - age_open
                fresh = min(max(v_th_slots + 1 - age_open, 0), cycle)
                contrib += (
                    pmf_prev[c_prev - 1] * pmf_cur[c_cur - 1] * (cycle - fresh)
                )
        total += prob_y * contrib
        done_growing = y * tau_r > v_th_slots + tau_r
        if (prob_y * (y + 3) * tau_r < tol and done_growing) or y > 2_000_000:
            break
        y += 1
        prob_y *= miss
    return total
