"""NumPy fallback with the same contract as the compiled ``rk4_advance``."""
import numpy as np


def rk4_advance(x, ei, ej, a, th, dinv, p, h, nsteps, out):
    ei = np.asarray(ei)
    ej = np.asarray(ej)
    a = np.asarray(a)
    th = np.asarray(th)
    dinv = np.asarray(dinv)
    p = np.asarray(p)
    n = x.shape[1]
    s0 = np.sin(th)
    B = np.zeros((a.shape[0], n))
    cols = np.arange(a.shape[0])
    B[cols, ei] = 1.0
    B[cols, ej] = -1.0
    record = out.shape[0] > 0

    def field(y):
        flow = a * (np.sin(y[:, ei] - y[:, ej] + th) - s0)
        return (p - flow @ B) * dinv

    y = np.array(x)
    for s in range(nsteps):
        k1 = field(y)
        k2 = field(y + 0.5 * h * k1)
        k3 = field(y + 0.5 * h * k2)
        k4 = field(y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if record:
            out[s] = y
    x[...] = y
