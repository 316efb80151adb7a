"""Monte-Carlo error-rate measurement over the binary-input AWGN channel.

Frames are drawn in fixed-size chunks with one RNG per frame, keyed by
(master seed, frame index). The stop rule is evaluated on chunk
boundaries in frame order, so results are reproducible bit for bit
regardless of how many worker processes run the chunks.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, transmit
from .codec import Decoder, channel_llrs, encode, symbols_to_bits
from .construction import HybridParityCheck
from .groups import bits_per_symbol, symbol_weights

__all__ = [
    "CampaignConfig",
    "PointResult",
    "run_point",
    "run_campaign",
    "CSV_FIELDS",
]

CSV_FIELDS = [
    "ebn0_db", "sigma", "frames", "frame_errors", "bit_errors",
    "info_bits", "fer", "ber", "fer_ci_lo", "fer_ci_hi",
    "mean_iterations", "max_iter", "seed",
]

_WORKER_ENV = "HYBRIDLDPC_WORKERS"


@dataclass(frozen=True)
class CampaignConfig:
    """Knobs for one measurement campaign."""

    max_iter: int = 500
    min_frame_errors: int = 200
    max_frames: int = 10_000_000
    chunk_frames: int = 256
    seed: int = 0
    random_codewords: bool = False
    workers: int | None = None

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        env = os.environ.get(_WORKER_ENV)
        if env:
            return max(1, int(env))
        return 1


@dataclass(frozen=True)
class PointResult:
    """Aggregated statistics of one Eb/N0 point."""

    ebn0_db: float
    sigma: float
    frames: int
    frame_errors: int
    bit_errors: int
    info_bits: int
    mean_iterations: float
    max_iter: int
    seed: int

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else math.nan

    @property
    def ber(self) -> float:
        return self.bit_errors / self.info_bits if self.info_bits else math.nan

    def fer_ci(self, z: float = 1.96) -> tuple[float, float]:
        """95 percent interval on the frame error rate.

        Normal approximation on the log scale; with zero observed errors
        the upper limit falls back to the rule of three.
        """
        if self.frames == 0:
            return (math.nan, math.nan)
        if self.frame_errors == 0:
            return (0.0, 3.0 / self.frames)
        p = self.fer
        sig_log = math.sqrt(max(1.0 - p, 0.0) / self.frame_errors)
        return (p * math.exp(-z * sig_log), p * math.exp(z * sig_log))

    def csv_row(self) -> dict:
        lo, hi = self.fer_ci()
        return {
            "ebn0_db": repr(self.ebn0_db),
            "sigma": repr(self.sigma),
            "frames": self.frames,
            "frame_errors": self.frame_errors,
            "bit_errors": self.bit_errors,
            "info_bits": self.info_bits,
            "fer": repr(self.fer),
            "ber": repr(self.ber),
            "fer_ci_lo": repr(lo),
            "fer_ci_hi": repr(hi),
            "mean_iterations": repr(self.mean_iterations),
            "max_iter": self.max_iter,
            "seed": self.seed,
        }


def _info_bit_count(code: HybridParityCheck) -> int:
    return int(sum(bits_per_symbol(int(q)) for q in code.var_groups[: code.n_info]))


def _weight_tables(code: HybridParityCheck) -> list[np.ndarray]:
    return [symbol_weights(int(q)) for q in code.var_groups[: code.n_info]]


# Module-level state for worker processes. Populated by the pool
# initializer; fork start method shares it with no pickling per chunk.
_CTX: dict = {}


def _init_worker(code: HybridParityCheck, params: ChannelParams,
                 cfg: CampaignConfig) -> None:
    _CTX["code"] = code
    _CTX["params"] = params
    _CTX["cfg"] = cfg
    _CTX["decoder"] = Decoder(code, max_iter=cfg.max_iter)
    _CTX["info_bits"] = _info_bit_count(code)
    _CTX["weights"] = _weight_tables(code)


def _run_chunk(args: tuple[int, int]) -> tuple[int, int, int, int]:
    """Decode frames [first, first + count): returns frame count, frame
    errors, info bit errors, summed iterations."""
    first, count = args
    code: HybridParityCheck = _CTX["code"]
    params: ChannelParams = _CTX["params"]
    cfg: CampaignConfig = _CTX["cfg"]
    decoder: Decoder = _CTX["decoder"]

    n_bits = code.n_bits
    tx_syms = np.zeros((count, code.n), dtype=np.int64)
    y = np.empty((count, n_bits), dtype=np.float64)
    for f in range(count):
        rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, first + f)))
        if cfg.random_codewords:
            info = np.array([
                rng.integers(0, int(q))
                for q in code.var_groups[: code.n_info]
            ], dtype=np.int64)
            tx_syms[f] = encode(code, info[None, :])[0]
        bits = symbols_to_bits(code, tx_syms[f])
        y[f] = transmit(bits, params, rng)

    chan = channel_llrs(code, y, params)
    res = decoder.decode(chan)

    errs = res.symbols != tx_syms
    frame_errors = int(np.count_nonzero(errs.any(axis=1)))
    bit_errors = 0
    if frame_errors:
        weights = _CTX["weights"]
        for c in range(code.n_info):
            col = errs[:, c]
            if col.any():
                x = np.bitwise_xor(res.symbols[col.nonzero()[0], c],
                                   tx_syms[col.nonzero()[0], c])
                bit_errors += int(weights[c][x].sum())
    return count, frame_errors, bit_errors, int(res.iterations.sum())


def run_point(
    code: HybridParityCheck,
    ebn0_db: float,
    rate: float,
    cfg: CampaignConfig = CampaignConfig(),
) -> PointResult:
    """Measure one Eb/N0 point until the error or frame budget is hit."""
    params = ChannelParams.from_ebn0_db(ebn0_db, rate)
    n_workers = cfg.resolved_workers()

    frames = 0
    frame_errors = 0
    bit_errors = 0
    iter_sum = 0

    def chunk_args():
        first = 0
        while first < cfg.max_frames:
            count = min(cfg.chunk_frames, cfg.max_frames - first)
            yield (first, count)
            first += count

    def consume(out: tuple[int, int, int, int]) -> bool:
        nonlocal frames, frame_errors, bit_errors, iter_sum
        c, fe, be, it = out
        frames += c
        frame_errors += fe
        bit_errors += be
        iter_sum += it
        return frame_errors >= cfg.min_frame_errors or frames >= cfg.max_frames

    if n_workers == 1:
        _init_worker(code, params, cfg)
        for args in chunk_args():
            if consume(_run_chunk(args)):
                break
    else:
        with ProcessPoolExecutor(
            max_workers=n_workers,
            initializer=_init_worker,
            initargs=(code, params, cfg),
        ) as pool:
            # consume strictly in submission order: totals do not depend
            # on the worker count
            for out in pool.map(_run_chunk, chunk_args()):
                if consume(out):
                    break

    return PointResult(
        ebn0_db=ebn0_db,
        sigma=params.sigma,
        frames=frames,
        frame_errors=frame_errors,
        bit_errors=bit_errors,
        info_bits=frames * _info_bit_count(code),
        mean_iterations=iter_sum / frames if frames else math.nan,
        max_iter=cfg.max_iter,
        seed=cfg.seed,
    )


def _load_done(csv_path: str) -> dict[tuple, dict]:
    done: dict[tuple, dict] = {}
    if not os.path.exists(csv_path):
        return done
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (float(row["ebn0_db"]), int(row["max_iter"]), int(row["seed"]))
            done[key] = row
    return done


def _result_from_row(row: dict) -> PointResult:
    return PointResult(
        ebn0_db=float(row["ebn0_db"]),
        sigma=float(row["sigma"]),
        frames=int(row["frames"]),
        frame_errors=int(row["frame_errors"]),
        bit_errors=int(row["bit_errors"]),
        info_bits=int(row["info_bits"]),
        mean_iterations=float(row["mean_iterations"]),
        max_iter=int(row["max_iter"]),
        seed=int(row["seed"]),
    )


def run_campaign(
    code: HybridParityCheck,
    ebn0_points: list[float],
    rate: float,
    cfg: CampaignConfig = CampaignConfig(),
    csv_path: str | None = None,
    log=None,
) -> list[PointResult]:
    """Measure a list of Eb/N0 points, appending each to a CSV as it
    finishes. Points already present in the CSV (same Eb/N0, iteration
    cap and seed) are loaded instead of re-run."""
    done = _load_done(csv_path) if csv_path else {}
    results = []
    for db in ebn0_points:
        key = (float(db), cfg.max_iter, cfg.seed)
        if key in done:
            res = _result_from_row(done[key])
            if log:
                log(f"  {db:+.3f} dB: cached ({res.frames} frames)")
            results.append(res)
            continue
        res = run_point(code, db, rate, cfg)
        results.append(res)
        if csv_path:
            new_file = not os.path.exists(csv_path)
            with open(csv_path, "a", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
                if new_file:
                    w.writeheader()
                w.writerow(res.csv_row())
        if log:
            lo, hi = res.fer_ci()
            log(f"  {db:+.3f} dB: fer {res.fer:.3e} [{lo:.2e}, {hi:.2e}] "
                f"({res.frame_errors}/{res.frames} frames, "
                f"{res.mean_iterations:.1f} iters)")
    return results
