"""Channel sampling and zero-forcing rates for the two transmission modes.

Channels are stored as ``H[j, n]`` with shape (N, N, L_R, L_T): the block
between BS n and user j. Noise is unit variance per receive antenna, so the
power ``P`` doubles as a transmit SNR. Both modes assume single-antenna
users.

Batched helpers (``*_block``) take a leading slot axis and are what the
simulator uses; the single-slot functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Topology, UnitContext


class SingularChannelError(RuntimeError):
    pass


def pathloss_db(distance_m):
    d_km = np.asarray(distance_m, dtype=float) / 1000.0
    return 140.7 + 36.7 * np.log10(d_km)


def amplitude_gain(distance_m):
    return 10.0 ** (-pathloss_db(distance_m) / 20.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ChannelState:
    H: np.ndarray
    t: int = 0

    @property
    def n_pairs(self) -> int:
        return self.H.shape[0]

    def composite(self) -> np.ndarray:
        """(N, N*L_T) matrix whose row j is [H_j1, ..., H_jN] (L_R = 1)."""
        n, _, l_r, l_t = self.H.shape
        if l_r != 1:
            raise ConfigError("rate formulas assume single-antenna users")
        return self.H[:, :, 0, :].reshape(n, n * l_t)


@dataclass(frozen=True)
class RatePair:
    comp: np.ndarray
    coord: np.ndarray
    scheduled: tuple = ()

    def __post_init__(self):
        if np.any(self.comp < 0) or np.any(self.coord < 0):
            raise ValueError("rates must be non-negative")


@dataclass(frozen=True)
class DofSummary:
    d_a: float
    d_b: float


def complex_gaussian(rng, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) entries."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(0.5)


def channel_block(topology: Topology, rng, n_slots: int, pathloss: bool = True) -> np.ndarray:
    n = topology.n_pairs
    g = complex_gaussian(rng, (n_slots, n, n, topology.l_r, topology.l_t))
    if pathloss:
        g *= amplitude_gain(topology.distances)[None, :, :, None, None]
    return g


def sample_channels(topology: Topology, rng, t: int = 0, pathloss: bool = True) -> ChannelState:
    return ChannelState(channel_block(topology, rng, 1, pathloss)[0], t)


# ---------------------------------------------------------------------------
# CoMP
# ---------------------------------------------------------------------------

def _composite_block(H: np.ndarray) -> np.ndarray:
    s, n, _, l_r, l_t = H.shape
    if l_r != 1:
        raise ConfigError("rate formulas assume single-antenna users")
    return H[:, :, :, 0, :].reshape(s, n, n * l_t)


def comp_precoder_block(H: np.ndarray, power: float):
    """ZF precoders for every slot.

    Returns (V, xi2) with V of shape (S, N*L_T, N) already scaled so that the
    most loaded BS transmits exactly ``power``.
    """
    hc = _composite_block(H)
    s, n, nt = hc.shape
    l_t = nt // n
    gram = hc @ np.conj(np.swapaxes(hc, 1, 2))
    # condition check; ZF needs full row rank
    sv = np.linalg.svd(hc, compute_uv=False)
    if np.any(sv[:, -1] <= 1e-12 * sv[:, 0]):
        raise SingularChannelError("composite channel is rank deficient")
    v = np.conj(np.swapaxes(hc, 1, 2)) @ np.linalg.inv(gram)
    per_bs = (np.abs(v.reshape(s, n, l_t, n)) ** 2).sum(axis=(2, 3))
    xi2 = power / per_bs.max(axis=1)
    return v * np.sqrt(xi2)[:, None, None], xi2


def comp_se_block(H: np.ndarray, power: float) -> np.ndarray:
    """Per-user spectral efficiency (bit/s/Hz), shape (S, N).

    Exact ZF leaves each user an interference-free unit-gain link scaled by
    xi, so every user sees log2(1 + xi^2).
    """
    _, xi2 = comp_precoder_block(H, power)
    n = H.shape[1]
    return np.repeat(np.log2(1.0 + xi2)[:, None], n, axis=1)


def comp_zf_rates(ch: ChannelState, power: float, ctx: UnitContext | None = None) -> np.ndarray:
    """CoMP rates in objects/slot, or bit/s/Hz when ``ctx`` is None."""
    se = comp_se_block(ch.H[None], power)[0]
    return se if ctx is None else ctx.objects_per_slot(se * ctx.bandwidth_hz)


# ---------------------------------------------------------------------------
# coordinated
# ---------------------------------------------------------------------------

def coordinated_precoders(H: np.ndarray, scheduled) -> np.ndarray:
    """Unit-norm beams, shape (N, L_T); rows of unscheduled users are zero.

    The beam of user j sits at BS j and lies in the orthogonal complement of
    the channels from BS j to every other scheduled user.
    """
    n, _, l_r, l_t = H.shape
    sched = [int(j) for j in scheduled]
    if len(sched) > l_t:
        raise ConfigError(f"cannot null {len(sched) - 1} users with {l_t} antennas")
    if len(set(sched)) != len(sched):
        raise ConfigError("duplicate user in schedule")
    beams = np.zeros((n, l_t), dtype=complex)
    for j in sched:
        h = H[j, j, 0, :]
        others = [jp for jp in sched if jp != j]
        if others:
            g = H[others, j, 0, :]                      # rows: channels towards the others
            proj = np.eye(l_t) - np.conj(g.T) @ np.linalg.solve(g @ np.conj(g.T), g)
            v = proj @ np.conj(h)
        else:
            v = np.conj(h)
        nv = np.linalg.norm(v)
        if nv <= 1e-15 * max(np.linalg.norm(h), 1e-300):
            raise SingularChannelError("beam collapsed under projection")
        beams[j] = v / nv
    return beams


def coordinated_se(H: np.ndarray, scheduled, power: float) -> np.ndarray:
    n = H.shape[0]
    beams = coordinated_precoders(H, scheduled)
    h = H[:, :, 0, :]                                    # (user, bs, L_T)
    gains = np.abs(np.einsum("jnl,nl->jn", h, beams)) ** 2 * power
    out = np.zeros(n)
    for j in scheduled:
        sig = gains[j, j]
        interf = sum(gains[j, jp] for jp in scheduled if jp != j)
        out[j] = np.log2(1.0 + sig / (1.0 + interf))
    return out


def coordinated_zf_rates(ch: ChannelState, scheduled, power: float,
                         ctx: UnitContext | None = None) -> np.ndarray:
    se = coordinated_se(ch.H, scheduled, power)
    return se if ctx is None else ctx.objects_per_slot(se * ctx.bandwidth_hz)


def schedule_block(rng, n_slots: int, n_users: int, n_sched: int) -> np.ndarray:
    """Uniformly random ``n_sched``-subsets, one row per slot."""
    m = min(n_sched, n_users)
    keys = rng.random((n_slots, n_users))
    return np.sort(np.argsort(keys, axis=1)[:, :m], axis=1)


def coordinated_se_block(H: np.ndarray, sched: np.ndarray, power: float) -> np.ndarray:
    """Vectorized ``coordinated_se`` for 1 or 2 scheduled users per slot."""
    s, n = H.shape[:2]
    m = sched.shape[1]
    if m > 2:
        return np.stack([coordinated_se(H[i], sched[i], power) for i in range(s)])
    idx = np.arange(s)
    h = H[:, :, :, 0, :]
    out = np.zeros((s, n))
    if m == 1:
        j = sched[:, 0]
        out[idx, j] = np.log2(1.0 + power * (np.abs(h[idx, j, j]) ** 2).sum(axis=1))
        return out
    j0, j1 = sched[:, 0], sched[:, 1]
    beams = []
    for a, b in ((j0, j1), (j1, j0)):
        hv = np.conj(h[idx, a, a])                   # desired direction at BS a
        g = h[idx, b, a]                             # towards the other user
        coef = (g * hv).sum(axis=1) / (np.abs(g) ** 2).sum(axis=1)
        v = hv - np.conj(g) * coef[:, None]
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        beams.append(v)
    v0, v1 = beams
    sig0 = power * np.abs((h[idx, j0, j0] * v0).sum(axis=1)) ** 2
    sig1 = power * np.abs((h[idx, j1, j1] * v1).sum(axis=1)) ** 2
    int0 = power * np.abs((h[idx, j0, j1] * v1).sum(axis=1)) ** 2
    int1 = power * np.abs((h[idx, j1, j0] * v0).sum(axis=1)) ** 2
    out[idx, j0] = np.log2(1.0 + sig0 / (1.0 + int0))
    out[idx, j1] = np.log2(1.0 + sig1 / (1.0 + int1))
    return out


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def dof_summary(topology: Topology, n_scheduled: int = 2) -> DofSummary:
    """Per-user symmetric DoF of the implemented ZF schemes."""
    n = topology.n_pairs
    if topology.l_r != 1:
        raise ConfigError("DoF summary assumes single-antenna users")
    m = min(n_scheduled, n, topology.l_t)
    return DofSummary(d_a=1.0, d_b=m / n)


def rate_block(topology: Topology, ctx: UnitContext, power: float, rng_ch, rng_sched,
               n_slots: int, n_sched: int = 2, pathloss: bool = True, retries: int = 1):
    """Rates for ``n_slots`` slots in objects/slot: (comp, coord, scheduled)."""
    H = channel_block(topology, rng_ch, n_slots, pathloss)
    try:
        comp = comp_se_block(H, power)
    except SingularChannelError:
        if retries <= 0:
            raise
        return rate_block(topology, ctx, power, rng_ch, rng_sched, n_slots, n_sched,
                          pathloss, retries - 1)
    sched = schedule_block(rng_sched, n_slots, topology.n_pairs, min(n_sched, topology.l_t))
    coord = coordinated_se_block(H, sched, power)
    scale = ctx.bandwidth_hz * ctx.slot_duration_s / ctx.object_bits
    return comp * scale, coord * scale, sched
