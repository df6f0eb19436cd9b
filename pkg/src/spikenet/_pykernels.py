"""Pure-Python event loop, bit-for-bit equivalent to ``_ckernels``.

Both backends pull uniforms from the bit generator in blocks of
:data:`BLOCK` doubles and use them three at a time, in the order
(waiting time, acting neuron, event kind). Keeping the block size and the
arithmetic identical makes outcomes, and the stream position after a run,
independent of the backend.
"""
from math import log1p

import numpy as np

BLOCK = 384  # multiple of 3
EXTINCT = 0
CENSORED = 1


def run_extinction(indptr, indices, init, gamma, horizon, max_events, bitgen, trace=None):
    """Direct-method simulation until extinction or censoring.

    Parameters
    ----------
    indptr, indices : ndarray
        Postsynaptic lists in CSR form.
    init : sequence of int
        Sorted, duplicate-free indices of the initially active neurons.
    gamma : float
        Leak rate.
    horizon : float
        Censoring time (``inf`` for none).
    max_events : int
        Event budget; negative means unlimited.
    bitgen : numpy.random.BitGenerator
    trace : list, optional
        If given, ``(time, neuron, is_spike, active_after)`` tuples are appended.

    Returns
    -------
    (status, time, events, spikes)
    """
    n = len(indptr) - 1
    pos = [-1] * n
    alist = [0] * n
    k = 0
    for i in init:
        pos[i] = k
        alist[k] = i
        k += 1
    if k == 0:
        return EXTINCT, 0.0, 0, 0

    ip = indptr.tolist()
    ix = indices.tolist()
    post = [ix[ip[i]:ip[i + 1]] for i in range(n)]
    gen = np.random.Generator(bitgen)
    unit = 1.0 + gamma
    p_spike = 1.0 / unit
    buf = None
    b = BLOCK
    t = 0.0
    events = 0
    spikes = 0
    while True:
        if events == max_events:
            return CENSORED, t, events, spikes
        if b == BLOCK:
            buf = gen.random(BLOCK).tolist()
            b = 0
        u1 = buf[b]
        u2 = buf[b + 1]
        u3 = buf[b + 2]
        b += 3
        t_next = t + (-log1p(-u1)) / (k * unit)
        if t_next > horizon:
            return CENSORED, horizon, events, spikes
        t = t_next
        i = alist[int(u2 * k)]
        p = pos[i]
        k -= 1
        last = alist[k]
        alist[p] = last
        pos[last] = p
        pos[i] = -1
        spike = u3 < p_spike
        if spike:
            spikes += 1
            for j in post[i]:
                if pos[j] < 0:
                    pos[j] = k
                    alist[k] = j
                    k += 1
        events += 1
        if trace is not None:
            trace.append((t, i, spike, k))
        if k == 0:
            return EXTINCT, t, events, spikes
