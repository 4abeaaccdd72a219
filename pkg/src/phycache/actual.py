"""Actual-plane packet flow: IP mode marking, DP routing and PHY delivery.

Queues are fluid (objects). Each object request is one record whose
content must show up at the serving BS (coordinated) or at every BS
(CoMP) before it can be sent over the air. Chunk-level delays come from
the fluid: chunk c of a request is fulfilled once c/D of it has been
delivered.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

EPS = 1e-9


class Request:
    __slots__ = ("user", "obj", "t", "mode", "avail", "delivered", "chunks", "done")

    def __init__(self, user, obj, t, mode, n_bs):
        self.user = user
        self.obj = obj
        self.t = t
        self.mode = mode
        self.avail = [0.0] * n_bs
        self.delivered = 0.0
        self.chunks = 0
        self.done = False

    def ready(self) -> float:
        if self.mode:
            return min(self.avail) - self.delivered
        return self.avail[self.user] - self.delivered


class PacketLedger:
    """All actual-plane state for one run."""

    def __init__(self, n: int, chunks: int, cache_rate):
        self.n = n
        self.chunks = chunks
        self.cache_rate = np.broadcast_to(np.asarray(cache_rate, dtype=float), (n,)).tolist()
        self.server = [deque() for _ in range(n)]        # Q_gn entries: [req, remaining]
        self.cache_read = [deque() for _ in range(n)]
        self.buffers = ([[] for _ in range(n)], [[] for _ in range(n)])   # [mode][user]
        self.created = 0
        self.delivered = 0.0
        self.delays: list[int] = []
        self.hits = 0
        self.misses = 0
        self.open_requests = 0

    # -- queue lengths ------------------------------------------------------
    def server_backlog(self) -> np.ndarray:
        return np.array([sum(e[1] for e in q) for q in self.server])

    def cache_backlog(self) -> np.ndarray:
        return np.array([sum(e[1] for e in q) for q in self.cache_read])

    def coord_buffers(self) -> np.ndarray:
        """Q^B at each BS for its own user."""
        return np.array([sum(r.avail[j] - r.delivered for r in self.buffers[0][j])
                         for j in range(self.n)])

    def comp_buffers(self) -> np.ndarray:
        """Q^A[n, j]."""
        out = np.zeros((self.n, self.n))
        for j in range(self.n):
            for r in self.buffers[1][j]:
                for b in range(self.n):
                    out[b, j] += r.avail[b] - r.delivered
        return out

    def outstanding(self) -> float:
        return sum(1.0 - r.delivered for bufs in self.buffers for b in bufs for r in b)

    def total_backlog(self) -> float:
        return float(self.server_backlog().sum() + self.cache_backlog().sum()
                     + self.coord_buffers().sum() + self.comp_buffers().sum())


class VirtualCompQueues:
    """Signed counters U[j, k] tying actual CoMP marking to virtual CoMP service."""

    def __init__(self, n: int, k: int):
        self.U = np.zeros((n, k))

    def copy(self) -> "VirtualCompQueues":
        out = VirtualCompQueues(*self.U.shape)
        out.U = self.U.copy()
        return out


def select_ip_modes(vq: VirtualCompQueues, arrivals: np.ndarray, mode: int,
                    mu_a: np.ndarray) -> np.ndarray:
    """Mark this slot's requests CoMP (1) or coordinated (0); updates ``vq``.

    A pair (j, k) is marked CoMP while the virtual CoMP service credited to
    it, including this slot's, exceeds the demand already marked CoMP.
    """
    credit = vq.U + (mu_a if mode else 0.0)
    m = (credit > 0).astype(np.int8)
    vq.U = credit - m * arrivals
    return m


def route_packets(ledger: PacketLedger, cache_s: np.ndarray, modes: np.ndarray,
                  arrivals: np.ndarray, t: int, backhaul) -> None:
    n = ledger.n
    js, ks = np.nonzero(arrivals)
    for j, k in zip(js.tolist(), ks.tolist()):
        m = int(modes[j, k])
        for _ in range(int(arrivals[j, k])):
            req = Request(j, k, t, m, n)
            ledger.created += 1
            ledger.open_requests += 1
            ledger.buffers[m][j].append(req)
            targets = range(n) if m else (j,)
            for b in targets:
                if cache_s[b, k]:
                    ledger.cache_read[b].append([req, 1.0])
                    ledger.hits += 1
                else:
                    ledger.server[b].append([req, 1.0])
                    ledger.misses += 1
    for b in range(n):
        _drain(ledger.server[b], float(backhaul[b]), b)
        _drain(ledger.cache_read[b], ledger.cache_rate[b], b)


def _drain(queue: deque, budget: float, bs: int) -> None:
    while queue and budget > EPS:
        head = queue[0]
        x = head[1] if head[1] <= budget else budget
        head[0].avail[bs] += x
        head[1] -= x
        budget -= x
        if head[1] <= EPS:
            head[0].avail[bs] += head[1]
            queue.popleft()


def deliver_phy(ledger: PacketLedger, mode: int, rates, t: int) -> int:
    """Send buffered content over the air; returns the number of chunks fulfilled."""
    d = ledger.chunks
    fulfilled = 0
    for j, budget in enumerate(rates):
        if budget <= EPS:
            continue
        buf = ledger.buffers[mode][j]
        finished = False
        for req in buf:
            avail = req.ready()
            if avail <= EPS:
                continue
            x = avail if avail <= budget else budget
            req.delivered += x
            budget -= x
            ledger.delivered += x
            c = min(d, int((req.delivered + EPS) * d))
            if c > req.chunks:
                ledger.delays.extend([t - req.t + 1] * (c - req.chunks))
                fulfilled += c - req.chunks
                req.chunks = c
            if c == d:
                req.done = True
                finished = True
            if budget <= EPS:
                break
        if finished:
            ledger.buffers[mode][j] = [r for r in buf if not r.done]
            ledger.open_requests -= len(buf) - len(ledger.buffers[mode][j])
    return fulfilled
