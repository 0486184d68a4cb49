"""One network-coded cooperation round and its outage statistics.

Sources S_1..S_N, relays R_1..R_M and one destination D.  The destination
keeps the sources whose direct-link SNR ranks (descending) are listed in the
source rank set I; each relay is scored by the weakest link on its two-hop
path, and relays are kept by the relay rank set J.  Ranks are 1-based (rank 1
is the strongest); node ids returned by the selectors are 0-based.

Link model: ``y = sqrt(rho) h x + w`` with ``h ~ CN(0, theta)`` held for a
whole frame and ``w ~ CN(0, sigma^2)``, so the link SNR ``rho |h|^2 / sigma^2``
is exponential with mean ``rho theta / sigma^2``.  Field symbols map to q-PSK
points ``exp(2 pi i v / q)`` (BPSK for q = 2).

A frame counts as received only if every symbol is right.  The destination
learns this from a genie check standing in for a CRC, then solves for the K
source frames over F_q.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..scenario import complex_normal
from .field import PrimeField, _is_prime


class CoopConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    num_sources: int = Field(5, ge=1)
    selected_sources: int = Field(3, ge=1)
    num_relays: int = Field(3, ge=1)
    selected_relays: int = Field(2, ge=1)
    source_ranks: tuple[int, ...] | None = None
    relay_ranks: tuple[int, ...] | None = None
    tx_snr: float = Field(1.0, ge=0)
    noise_variance: float = Field(1.0, ge=0)
    field_order: int = 2
    frame_length: int = Field(32, ge=1)
    mean_gain_sd: float = Field(10.0, gt=0)
    mean_gain_sr: float = Field(10.0, gt=0)
    mean_gain_rd: float = Field(10.0, gt=0)
    direct_links: bool = True
    mode: Literal["waveform", "erasure"] = "waveform"
    threshold: float = Field(1.0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "CoopConfig":
        errors = []
        if self.selected_sources > self.num_sources:
            errors.append("selected_sources must be <= num_sources")
        if self.selected_relays > self.num_relays:
            errors.append("selected_relays must be <= num_relays")
        if not _is_prime(self.field_order):
            errors.append(f"field_order must be prime, got {self.field_order}")
        for name, ranks, size, total in (
            ("source_ranks", self.source_ranks, self.selected_sources, self.num_sources),
            ("relay_ranks", self.relay_ranks, self.selected_relays, self.num_relays),
        ):
            if ranks is None:
                continue
            try:
                _check_ranks(ranks, total)
            except ValueError as exc:
                errors.append(f"{name}: {exc}")
            if len(ranks) != size:
                errors.append(f"{name} must list exactly {size} ranks")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    @property
    def source_rank_set(self) -> np.ndarray:
        return np.asarray(self.source_ranks or range(1, self.selected_sources + 1))

    @property
    def relay_rank_set(self) -> np.ndarray:
        return np.asarray(self.relay_ranks or range(1, self.selected_relays + 1))


@dataclass
class DestinationResult:
    success: bool
    rank: int
    frames: np.ndarray | None = None


@dataclass
class CoopRound:
    snr_sd: np.ndarray  # (N,)
    snr_sr: np.ndarray  # (N, M)
    snr_rd: np.ndarray  # (M,)
    sources: np.ndarray  # selected source ids, in rank order
    relays: np.ndarray  # selected relay ids, in rank order
    bottlenecks: np.ndarray  # (M,)
    frames: np.ndarray  # (K, F) transmitted field symbols
    coded: np.ndarray  # (L, F) frames produced by the relays
    alpha: np.ndarray  # (L, K)
    direct_ok: np.ndarray  # (K,)
    coded_ok: np.ndarray  # (L,)
    result: DestinationResult = field(repr=False, default=None)

    @property
    def outage(self) -> bool:
        return not self.result.success


@dataclass
class OutageEstimate:
    p: float
    ci_low: float
    ci_high: float
    trials: int

    @classmethod
    def from_counts(cls, hits: int, trials: int) -> "OutageEstimate":
        p = hits / trials
        half = 1.96 * np.sqrt(p * (1 - p) / trials)
        return cls(float(p), float(max(0.0, p - half)), float(min(1.0, p + half)), trials)


def _check_ranks(ranks, total: int) -> np.ndarray:
    r = np.asarray(ranks, dtype=int)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("rank set must be a non-empty 1-D sequence")
    if len(np.unique(r)) != r.size:
        raise ValueError(f"duplicate ranks in {list(r)}")
    if np.any(np.diff(r) <= 0):
        raise ValueError(f"ranks must be strictly increasing, got {list(r)}")
    if r[0] < 1 or r[-1] > total:
        raise ValueError(f"ranks must lie in 1..{total}, got {list(r)}")
    return r


def _by_rank(snr, ranks) -> np.ndarray:
    snr = np.asarray(snr, dtype=float)
    r = _check_ranks(ranks, snr.size)
    order = np.argsort(-snr, kind="stable")  # ties: lower id first
    return order[r - 1]


def select_sources(snr_sd, ranks) -> np.ndarray:
    """Ids of the sources whose direct-link SNR holds the given descending ranks."""
    return _by_rank(snr_sd, ranks)


def bottleneck_snr(snr_sr, snr_rd, sources) -> np.ndarray:
    """Weakest link on every relay's path: min over selected S->R links and R->D.

    ``snr_sr`` is (N, M); the result has one entry per relay.
    """
    snr_sr = np.asarray(snr_sr, dtype=float)
    sources = np.asarray(sources, dtype=int)
    return np.minimum(snr_sr[sources].min(axis=0), np.asarray(snr_rd, dtype=float))


def select_relays(bottlenecks, ranks) -> np.ndarray:
    return _by_rank(bottlenecks, ranks)


def modulate(symbols, q: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.asarray(symbols) / q)


def ml_decode(y, h, rho: float, q: int) -> np.ndarray:
    """Minimum-distance decision over the q constellation points, per position."""
    points = np.sqrt(rho) * np.asarray(h)[..., None] * modulate(np.arange(q), q)
    y = np.asarray(y)
    return np.argmin(np.abs(y[..., None] - points) ** 2, axis=-1).astype(np.int64)


def network_encode(frames, alpha, gf: PrimeField) -> np.ndarray:
    """Position-wise sum of ``alpha_k * frame_k`` over F_q."""
    frames = gf.element(frames)
    alpha = gf.element(alpha)
    if frames.ndim == 1:
        frames = frames[None, :]
    if alpha.shape != (frames.shape[0],):
        raise ValueError(f"need {frames.shape[0]} coefficients, got shape {alpha.shape}")
    if np.any(alpha == 0):
        raise ValueError("network-coding coefficients must be nonzero")
    return gf.element((alpha[:, None] * frames).sum(axis=0))


def transmit(frame, h, rho: float, noise_variance: float, q: int, rng: np.random.Generator | None) -> np.ndarray:
    x = modulate(frame, q)
    y = np.sqrt(rho) * h * x
    if noise_variance > 0:
        y = y + complex_normal(rng, y.shape, noise_variance)
    return y


def relay_transmit(coded_frame, h_rd, rho: float, noise_variance: float, q: int, rng=None) -> np.ndarray:
    """Signal at D from one relay's network-coded frame."""
    return transmit(coded_frame, h_rd, rho, noise_variance, q, rng)


def destination_decode(direct_frames, direct_ok, coded_frames, coded_ok, alpha, gf: PrimeField) -> DestinationResult:
    """Recover the K source frames from whatever arrived intact.

    Rows of the system are unit vectors for intact direct frames and alpha rows
    for intact coded frames.  Rank below K is an outage, reported rather than
    raised.
    """
    alpha = gf.element(np.atleast_2d(alpha))
    n_relays, k = alpha.shape
    direct_ok = np.asarray(direct_ok, dtype=bool)
    coded_ok = np.asarray(coded_ok, dtype=bool)
    rows, rhs = [], []
    if direct_frames is not None:
        direct_frames = gf.element(np.atleast_2d(direct_frames))
        for i in np.flatnonzero(direct_ok):
            rows.append(np.eye(k, dtype=np.int64)[i])
            rhs.append(direct_frames[i])
    if n_relays:
        coded_frames = gf.element(np.atleast_2d(coded_frames))
        for l in np.flatnonzero(coded_ok):
            rows.append(alpha[l])
            rhs.append(coded_frames[l])
    if not rows:
        return DestinationResult(False, 0)
    a = np.array(rows)
    rank = gf.rank(a)
    if rank < k:
        return DestinationResult(False, rank)
    x = gf.solve(a, np.array(rhs))
    return DestinationResult(True, rank, x)


def _draw_links(cfg: CoopConfig, rng: np.random.Generator, batch=()):
    n, m = cfg.num_sources, cfg.num_relays
    h_sd = complex_normal(rng, (*batch, n), cfg.mean_gain_sd)
    h_sr = complex_normal(rng, (*batch, n, m), cfg.mean_gain_sr)
    h_rd = complex_normal(rng, (*batch, m), cfg.mean_gain_rd)
    return h_sd, h_sr, h_rd


def link_snr(h, cfg: CoopConfig) -> np.ndarray:
    gain = cfg.tx_snr * np.abs(h) ** 2
    if cfg.noise_variance == 0:
        return np.where(gain > 0, np.inf, 0.0)
    return gain / cfg.noise_variance


def run_round(cfg: CoopConfig, rng: np.random.Generator, gf: PrimeField | None = None) -> CoopRound:
    """Full waveform simulation of one cooperation block."""
    gf = gf or PrimeField(cfg.field_order)
    q, rho, s2 = gf.q, cfg.tx_snr, cfg.noise_variance
    h_sd, h_sr, h_rd = _draw_links(cfg, rng)
    snr_sd, snr_sr, snr_rd = link_snr(h_sd, cfg), link_snr(h_sr, cfg), link_snr(h_rd, cfg)

    sources = select_sources(snr_sd, cfg.source_rank_set)
    bott = bottleneck_snr(snr_sr, snr_rd, sources)
    relays = select_relays(bott, cfg.relay_rank_set)
    k, n_rel, f = len(sources), len(relays), cfg.frame_length

    frames = gf.random(rng, (k, f))
    alpha = gf.random(rng, (n_rel, k), nonzero=True)

    if cfg.direct_links:
        y_sd = np.stack([transmit(frames[i], h_sd[s], rho, s2, q, rng) for i, s in enumerate(sources)])
        direct = ml_decode(y_sd, h_sd[sources][:, None], rho, q)
        direct_ok = np.all(direct == frames, axis=1)
    else:
        direct, direct_ok = None, np.zeros(k, dtype=bool)

    coded = np.zeros((n_rel, f), dtype=np.int64)
    coded_rx = np.zeros((n_rel, f), dtype=np.int64)
    for l, r in enumerate(relays):
        y_sr = np.stack([transmit(frames[i], h_sr[s, r], rho, s2, q, rng) for i, s in enumerate(sources)])
        decoded = ml_decode(y_sr, h_sr[sources, r][:, None], rho, q)
        coded[l] = network_encode(decoded, alpha[l], gf)
        y_rd = relay_transmit(coded[l], h_rd[r], rho, s2, q, rng)
        coded_rx[l] = ml_decode(y_rd, h_rd[r], rho, q)
    truth = gf.matmul(alpha, frames) if n_rel else np.zeros((0, f), dtype=np.int64)
    coded_ok = np.all(coded_rx == truth, axis=1)

    result = destination_decode(direct, direct_ok, coded_rx, coded_ok, alpha, gf)
    if result.success and not np.array_equal(result.frames, frames):
        raise AssertionError("destination accepted frames that differ from the transmitted ones")
    return CoopRound(
        snr_sd=snr_sd,
        snr_sr=snr_sr,
        snr_rd=snr_rd,
        sources=sources,
        relays=relays,
        bottlenecks=bott,
        frames=frames,
        coded=coded,
        alpha=alpha,
        direct_ok=direct_ok,
        coded_ok=coded_ok,
        result=result,
    )


def _erasure_chunk(cfg: CoopConfig, rng: np.random.Generator, n: int, gf: PrimeField):
    h_sd, h_sr, h_rd = _draw_links(cfg, rng, (n,))
    snr_sd, snr_sr, snr_rd = link_snr(h_sd, cfg), link_snr(h_sr, cfg), link_snr(h_rd, cfg)
    x = cfg.threshold
    i_ranks, j_ranks = cfg.source_rank_set, cfg.relay_rank_set
    k, n_rel = len(i_ranks), len(j_ranks)

    src = np.argsort(-snr_sd, axis=1, kind="stable")[:, i_ranks - 1]  # (n, K)
    sr_sel = np.take_along_axis(snr_sr, src[:, :, None], axis=1)  # (n, K, M)
    bott = np.minimum(sr_sel.min(axis=1), snr_rd)  # (n, M)
    rel = np.argsort(-bott, axis=1, kind="stable")[:, j_ranks - 1]  # (n, L)
    coded_ok = np.take_along_axis(bott, rel, axis=1) >= x
    if cfg.direct_links:
        direct_ok = np.take_along_axis(snr_sd, src, axis=1) >= x
    else:
        direct_ok = np.zeros((n, k), dtype=bool)

    alpha = gf.random(rng, (n, n_rel, k), nonzero=True)
    eye = np.broadcast_to(np.eye(k, dtype=np.int64), (n, k, k))
    stacked = np.concatenate([eye * direct_ok[:, :, None], alpha * coded_ok[:, :, None]], axis=1)
    outage = gf.batched_rank(stacked) < k
    relay_outage = bott.max(axis=1) < x
    return outage, relay_outage


def outage_probability(cfg: CoopConfig, trials: int, rng: np.random.Generator, chunk: int = 100_000) -> dict:
    """Monte Carlo outage estimates with 95% normal intervals.

    Returns ``{"outage": ..., "relay_outage": ...}``.  ``outage`` is the
    destination failing to recover all selected frames; ``relay_outage`` is the
    best relay's bottleneck SNR falling below ``cfg.threshold`` (erasure mode
    only, None otherwise).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gf = PrimeField(cfg.field_order)
    if cfg.mode == "waveform":
        hits = sum(run_round(cfg, rng, gf).outage for _ in range(trials))
        return {"outage": OutageEstimate.from_counts(int(hits), trials), "relay_outage": None}
    hits = relay_hits = done = 0
    while done < trials:
        n = min(chunk, trials - done)
        out, rel = _erasure_chunk(cfg, rng, n, gf)
        hits += int(out.sum())
        relay_hits += int(rel.sum())
        done += n
    return {
        "outage": OutageEstimate.from_counts(hits, trials),
        "relay_outage": OutageEstimate.from_counts(relay_hits, trials),
    }


def relay_outage_oracle(selected_sources: int, num_relays: int, mean_snr: float, threshold: float) -> float:
    """P(best bottleneck < x) for i.i.d. exponential links of mean ``mean_snr``.

    Each bottleneck is the minimum of K + 1 such links, itself exponential with
    mean ``mean_snr / (K + 1)``; the best of M independent ones falls below x
    with probability ``(1 - exp(-(K + 1) x / mean_snr))^M``.
    """
    return float((1.0 - np.exp(-(selected_sources + 1) * threshold / mean_snr)) ** num_relays)
