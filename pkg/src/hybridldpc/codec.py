"""Encoding and belief propagation decoding of hybrid LDPC codes.

Encoding exploits the triangular redundancy structure: rows are processed
last to first and each row's diagonal redundancy symbol is the group sum
of the mapped contributions of its other neighbors, so the cost is one
pass over the edges.

The decoder is a flooding sum-product scheme working symbolwise. Check
updates run in the check group: incoming variable messages are extended
through their edge maps (probability mass scattered onto the map image,
zero elsewhere), combined under the group convolution via the fast
Walsh Hadamard transform with leave-one-out prefix and suffix products,
and the results are truncated back through each edge map (gather on the
image, renormalize). Variable updates add log likelihood ratios and
subtract the edge's own contribution. Messages are batched over frames
and over node classes that share a degree and group pair, padded to the
largest group order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hybridldpc.channel import LLR_CLIP, ChannelParams, symbol_llr_array
from hybridldpc.construction import HybridParityCheck
from hybridldpc.groups import bits_per_symbol

PAD = 1e30  # padding LLR for components beyond a column's group order
_PROB_FLOOR = 1e-300

__all__ = [
    "walsh_hadamard",
    "encode",
    "syndrome",
    "bits_to_symbols",
    "symbols_to_bits",
    "channel_llrs",
    "Decoder",
    "DecodeResult",
]


def walsh_hadamard(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalized Walsh Hadamard transform along one axis.

    Self-inverse up to the factor q: applying it twice multiplies by the
    axis length, which must be a power of two.
    """
    x = np.array(x, dtype=np.float64, copy=True)
    x = np.moveaxis(x, axis, -1)
    q = x.shape[-1]
    if q & (q - 1):
        raise ValueError(f"transform length must be a power of two, got {q}")
    h = 1
    while h < q:
        y = x.reshape(x.shape[:-1] + (q // (2 * h), 2, h))
        a = y[..., 0, :].copy()
        b = y[..., 1, :]
        y[..., 0, :] = a + b
        y[..., 1, :] = a - b
        h *= 2
    return np.moveaxis(x, -1, axis)


def loo_convolve(probs: np.ndarray) -> np.ndarray:
    """Leave-one-out group convolution along the second-to-last axis.

    ``probs`` holds probability vectors with shape (..., j, q); the
    result at position d is the convolution under component-wise XOR of
    the other j - 1 vectors. Products are taken in the transform domain
    with prefix/suffix accumulation, so no division is involved.
    """
    spec = walsh_hadamard(probs, axis=-1)
    j = probs.shape[-2]
    pref = np.ones_like(spec)
    for d in range(1, j):
        pref[..., d, :] = pref[..., d - 1, :] * spec[..., d - 1, :]
    suff = np.ones_like(spec)
    for d in range(j - 2, -1, -1):
        suff[..., d, :] = suff[..., d + 1, :] * spec[..., d + 1, :]
    return walsh_hadamard(pref * suff, axis=-1) / probs.shape[-1]


def bits_to_symbols(code: HybridParityCheck, bits: np.ndarray, cols: slice | None = None) -> np.ndarray:
    """Pack per-column bits (LSB first within a column) into symbols.

    ``bits`` has shape (..., total bits of the selected columns); columns
    default to the information block.
    """
    sel = code.var_groups if cols is None else code.var_groups[cols]
    if cols is None:
        sel = code.var_groups[: code.n_info]
    bits = np.asarray(bits)
    out = np.zeros(bits.shape[:-1] + (len(sel),), dtype=np.int64)
    pos = 0
    for c, q in enumerate(sel):
        p = bits_per_symbol(int(q))
        chunk = bits[..., pos: pos + p].astype(np.int64)
        out[..., c] = (chunk << np.arange(p)).sum(axis=-1)
        pos += p
    if pos != bits.shape[-1]:
        raise ValueError(f"expected {pos} bits, got {bits.shape[-1]}")
    return out


def symbols_to_bits(code: HybridParityCheck, symbols: np.ndarray) -> np.ndarray:
    """Unpack full codeword symbols to bits, column major, LSB first."""
    symbols = np.asarray(symbols)
    total = code.n_bits
    out = np.zeros(symbols.shape[:-1] + (total,), dtype=np.uint8)
    pos = 0
    for c, q in enumerate(code.var_groups):
        p = bits_per_symbol(int(q))
        sym = symbols[..., c]
        for b in range(p):
            out[..., pos + b] = (sym >> b) & 1
        pos += p
    return out


def _row_edge_lists(code: HybridParityCheck) -> list[list[int]]:
    rows: list[list[int]] = [[] for _ in range(code.m)]
    for e in range(code.n_edges):
        rows[int(code.edge_row[e])].append(e)
    return rows


def encode(code: HybridParityCheck, info_symbols: np.ndarray) -> np.ndarray:
    """Compute full codewords from information symbols, shape (..., n_info)."""
    info_symbols = np.atleast_2d(np.asarray(info_symbols, dtype=np.int64))
    if info_symbols.shape[-1] != code.n_info:
        raise ValueError(f"expected {code.n_info} information symbols")
    frames = info_symbols.shape[0]
    syms = np.zeros((frames, code.n), dtype=np.int64)
    syms[:, : code.n_info] = info_symbols
    rows = _row_edge_lists(code)
    for t in range(code.m - 1, -1, -1):
        diag_col = code.n_info + t
        acc = np.zeros(frames, dtype=np.int64)
        for e in rows[t]:
            c = int(code.edge_col[e])
            if c == diag_col:
                continue
            table = code.edge_maps[e].apply_table
            acc ^= table[syms[:, c]]
        syms[:, diag_col] = acc  # identity diagonal map: symbol equals the sum
    return syms


def syndrome(code: HybridParityCheck, symbols: np.ndarray) -> np.ndarray:
    """Group sum of mapped neighbors per check row; zero for codewords."""
    symbols = np.atleast_2d(np.asarray(symbols, dtype=np.int64))
    frames = symbols.shape[0]
    out = np.zeros((frames, code.m), dtype=np.int64)
    for e in range(code.n_edges):
        r, c = int(code.edge_row[e]), int(code.edge_col[e])
        out[:, r] ^= code.edge_maps[e].apply_table[symbols[:, c]]
    return out


def channel_llrs(code: HybridParityCheck, y: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Per-column symbol LLRs from received values, shape (F, n, q_max).

    Received bits are column major, LSB first within each column. Components
    at or above a column's group order are padded with a large constant.
    """
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if y.shape[-1] != code.n_bits:
        raise ValueError(f"expected {code.n_bits} received values")
    frames = y.shape[0]
    q_max = int(max(code.var_groups.max(), code.check_groups.max()))
    bllr = (2.0 / params.noise_var) * y
    out = np.full((frames, code.n, q_max), PAD, dtype=np.float64)
    pos = 0
    for c, q in enumerate(code.var_groups):
        q = int(q)
        p = bits_per_symbol(q)
        out[:, c, :q] = symbol_llr_array(bllr[:, pos: pos + p], q)
        pos += p
    return out


@dataclass
class DecodeResult:
    symbols: np.ndarray       # (F, n) hard decisions
    success: np.ndarray       # (F,) syndrome reached zero
    iterations: np.ndarray    # (F,) iterations used (max_iter when failed)
    posterior_llr: np.ndarray | None = None  # (F, n, q_max) when requested


class _VarClass:
    def __init__(self, degree: int, order: int, cols: np.ndarray,
                 edges: np.ndarray, img: np.ndarray):
        self.degree = degree
        self.order = order
        self.cols = cols          # (C,)
        self.edges = edges        # (C, degree) edge ids
        self.img = img            # (C, degree, order) image index per edge


class _CheckClass:
    def __init__(self, degree: int, order: int, rows: np.ndarray,
                 edges: np.ndarray, img: np.ndarray, var_orders: np.ndarray):
        self.degree = degree
        self.order = order
        self.rows = rows
        self.edges = edges        # (C, degree)
        self.img = img            # (C, degree, q_max) gather table, padded with 0
        self.var_orders = var_orders  # (C, degree)
        self.mask = np.arange(img.shape[-1])[None, None, :] < var_orders[..., None]


class Decoder:
    """Batched sum-product decoder for one code."""

    def __init__(self, code: HybridParityCheck, max_iter: int = 100):
        if max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        self.code = code
        self.max_iter = max_iter
        self.q_max = int(max(code.var_groups.max(), code.check_groups.max()))
        self._build_classes()

    def _build_classes(self) -> None:
        code = self.code
        E = code.n_edges
        col_of = code.edge_col
        row_of = code.edge_row
        cdeg = code.col_degrees()
        rdeg = code.row_degrees()

        edges_by_col: list[list[int]] = [[] for _ in range(code.n)]
        edges_by_row: list[list[int]] = [[] for _ in range(code.m)]
        for e in range(E):
            edges_by_col[int(col_of[e])].append(e)
            edges_by_row[int(row_of[e])].append(e)

        apply_tables = np.zeros((E, self.q_max), dtype=np.int64)
        for e in range(E):
            t = code.edge_maps[e].apply_table
            apply_tables[e, : len(t)] = t
        self.apply_tables = apply_tables

        vclasses: dict[tuple[int, int], list[int]] = {}
        for c in range(code.n):
            vclasses.setdefault((int(cdeg[c]), int(code.var_groups[c])), []).append(c)
        self.var_classes: list[_VarClass] = []
        for (i, qk), cols in sorted(vclasses.items()):
            cols = np.array(cols, dtype=np.int64)
            edges = np.array([edges_by_col[c] for c in cols], dtype=np.int64)
            img = apply_tables[edges][:, :, :qk]
            self.var_classes.append(_VarClass(i, qk, cols, edges, img))

        cclasses: dict[tuple[int, int], list[int]] = {}
        for r in range(code.m):
            cclasses.setdefault((int(rdeg[r]), int(code.check_groups[r])), []).append(r)
        self.check_classes: list[_CheckClass] = []
        for (j, ql), rows in sorted(cclasses.items()):
            rows = np.array(rows, dtype=np.int64)
            edges = np.array([edges_by_row[r] for r in rows], dtype=np.int64)
            img = apply_tables[edges]
            vord = code.var_groups[col_of[edges]]
            self.check_classes.append(_CheckClass(j, ql, rows, edges, img, vord))

        # syndrome helper: per check class, column ids of each edge
        self._synd_cols = [code.edge_col[cc.edges] for cc in self.check_classes]

    # ---------------- message passing steps ----------------

    def _var_update(self, m_cv: np.ndarray, chan: np.ndarray, m_vc: np.ndarray) -> None:
        """LLR-domain variable update and extension into the check groups."""
        F = m_cv.shape[0]
        for vc in self.var_classes:
            qk = vc.order
            inc = m_cv[:, vc.edges, :qk]                       # (F, C, i, qk)
            ch = chan[:, vc.cols, :qk]                         # (F, C, qk)
            total = ch[:, :, None, :] + inc.sum(axis=2, keepdims=True)
            out = total - inc
            # to probabilities; clip the spread after re-anchoring to the min
            # so the cap lands on the same components under any relabeling of
            # the transmitted codeword
            out -= out.min(axis=-1, keepdims=True)
            np.clip(out, None, LLR_CLIP, out=out)
            np.exp(-out, out=out)
            out /= out.sum(axis=-1, keepdims=True)
            # extension: scatter mass onto each edge map's image
            C, i = vc.edges.shape
            ext = np.zeros((F, C, i, self.q_max), dtype=np.float64)
            idx = np.broadcast_to(vc.img[None], (F, C, i, qk))
            np.put_along_axis(ext, idx, out, axis=-1)
            m_vc[:, vc.edges.reshape(-1), :] = ext.reshape(F, C * i, self.q_max)

    def _check_update(self, m_vc: np.ndarray, m_cv: np.ndarray) -> None:
        """Group-convolution check update and truncation into var groups."""
        F = m_vc.shape[0]
        for cc in self.check_classes:
            ql = cc.order
            probs = m_vc[:, cc.edges, :ql]                     # (F, C, j, ql)
            conv = loo_convolve(probs)
            np.clip(conv, 0.0, None, out=conv)
            # truncation: gather the image components, renormalize, to LLRs
            full = np.zeros((F,) + cc.edges.shape + (self.q_max,), dtype=np.float64)
            full[..., :ql] = conv
            idx = np.broadcast_to(cc.img[None], full.shape)
            trunc = np.take_along_axis(full, idx, axis=-1)
            trunc = np.where(cc.mask[None], trunc, 0.0)
            tsum = trunc.sum(axis=-1, keepdims=True)
            flat = tsum[..., 0] <= _PROB_FLOOR
            if np.any(flat):
                # degenerate all-zero message: fall back to uniform on the group
                unif = cc.mask.astype(np.float64) / cc.var_orders[..., None]
                trunc = np.where(flat[..., None], np.broadcast_to(unif[None], trunc.shape), trunc)
                tsum = trunc.sum(axis=-1, keepdims=True)
            trunc /= tsum
            np.clip(trunc, _PROB_FLOOR, None, out=trunc)
            # LLRs anchored at the largest mass in the group, spread capped;
            # component 0 is not a safe anchor under codeword relabeling
            logp = np.log(trunc)
            ref = np.max(np.where(cc.mask[None], logp, -np.inf), axis=-1, keepdims=True)
            llr = ref - logp
            np.clip(llr, None, LLR_CLIP, out=llr)
            llr = np.where(cc.mask[None], llr, PAD)
            m_cv[:, cc.edges.reshape(-1), :] = llr.reshape(F, -1, self.q_max)

    def _posteriors(self, m_cv: np.ndarray, chan: np.ndarray) -> np.ndarray:
        F = m_cv.shape[0]
        post = np.array(chan, copy=True)
        for vc in self.var_classes:
            qk = vc.order
            inc = m_cv[:, vc.edges, :qk].sum(axis=2)
            post[:, vc.cols, :qk] += inc
        return post

    def _syndrome_ok(self, symbols: np.ndarray) -> np.ndarray:
        F = symbols.shape[0]
        ok = np.ones(F, dtype=bool)
        for cc, cols in zip(self.check_classes, self._synd_cols):
            syms = symbols[:, cols]                            # (F, C, j)
            tables = self.apply_tables[cc.edges]               # (C, j, q_max)
            mapped = np.take_along_axis(
                np.broadcast_to(tables[None], (F,) + tables.shape),
                syms[..., None], axis=-1)[..., 0]
            row_sum = np.bitwise_xor.reduce(mapped, axis=-1)   # (F, C)
            ok &= ~row_sum.any(axis=-1)
        return ok

    # ---------------- main loop ----------------

    def decode(self, chan_llr: np.ndarray, max_iter: int | None = None,
               want_posteriors: bool = False, early_stop: bool = True) -> DecodeResult:
        """Run flooding BP on channel symbol LLRs of shape (F, n, q_max).

        With ``early_stop`` a frame retires as soon as its hard decision
        satisfies every check; without it all frames run every iteration
        (used for exact-marginal checks on cycle-free codes).
        """
        chan = np.asarray(chan_llr, dtype=np.float64)
        if chan.ndim == 2:
            chan = chan[None]
        if chan.shape[1:] != (self.code.n, self.q_max):
            raise ValueError(
                f"channel LLRs must have shape (F, {self.code.n}, {self.q_max})"
            )
        iters = self.max_iter if max_iter is None else max_iter
        F = chan.shape[0]
        E = self.code.n_edges

        symbols = np.zeros((F, self.code.n), dtype=np.int64)
        success = np.zeros(F, dtype=bool)
        used = np.full(F, iters, dtype=np.int64)
        post_out = np.zeros((F, self.code.n, self.q_max)) if want_posteriors else None

        active = np.arange(F)
        chan_a = chan
        m_cv = np.zeros((F, E, self.q_max), dtype=np.float64)
        m_vc = np.zeros((F, E, self.q_max), dtype=np.float64)
        self._var_update(m_cv, chan_a, m_vc)

        # iteration 0 state: check hard decisions straight off the channel
        post = self._posteriors(m_cv, chan_a)
        hard = np.argmin(np.where(np.isfinite(post), post, PAD), axis=-1)
        ok = self._syndrome_ok(hard)
        symbols[active] = hard
        success[active] = ok
        used[active[ok]] = 0
        if want_posteriors:
            post_out[active] = post
        if early_stop:
            keep = ~ok
            active = active[keep]
            m_cv, m_vc, chan_a = m_cv[keep], m_vc[keep], chan_a[keep]

        it = 0
        while len(active) and it < iters:
            it += 1
            self._check_update(m_vc, m_cv)
            self._var_update(m_cv, chan_a, m_vc)
            post = self._posteriors(m_cv, chan_a)
            hard = np.argmin(np.where(np.isfinite(post), post, PAD), axis=-1)
            ok = self._syndrome_ok(hard)
            symbols[active] = hard
            if want_posteriors:
                post_out[active] = post
            newly = ok & ~success[active]
            success[active[ok]] = True
            used[active[newly]] = it
            if early_stop:
                keep = ~ok
                active = active[keep]
                m_cv, m_vc, chan_a = m_cv[keep], m_vc[keep], chan_a[keep]

        return DecodeResult(symbols, success, used, post_out)
