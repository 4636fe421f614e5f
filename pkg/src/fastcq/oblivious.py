"""Fast and oblivious evaluation of discrete convolutions.

The sum u_{n+1} = sum_{j<=n} omega_{n-j} g_j is split into blocks of
geometrically growing lags. The two most recent blocks (lags below 2B) are
summed directly from a short window of stored data. Every older block is
written through the contour representation of the weights, so that it is a
linear combination of solutions of linear ODEs y' = lam y + g, advanced by
the underlying time stepper at the contour nodes of its level.

Per level ell >= 2 and node the bank keeps at most four running states:

``RUN``   accumulates the current chunk of B^(ell-1) steps,
``PEND``  a finished chunk that still belongs to level ell-1,
``OLD``   chunks that leave the level together at the next B^ell boundary,
``NXT``   the remaining chunks of the level.

Level 2 needs no RUN/PEND pair: its chunks are short enough to be rebuilt
from the direct window when they enter the level.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .contours import PROFILES, interval_params
from .cqweights import weights_circle, window_sum

RUN, PEND, OLD, NXT = range(4)
SLOT_NAMES = ("RUN", "PEND", "OLD", "NXT")


@dataclass
class Schedule:
    """Block boundaries b(1) > ... > b(L-1) of the splitting after step n."""

    B: int
    L: int = 1
    q: list = field(default_factory=list)  # q[k-1] holds q(k)
    b: list = field(default_factory=list)  # b[k-1] holds b(k)
    n: int = 0

    def boundaries(self) -> list:
        """[b_0 = n, b_1, ..., b_{L-1}, b_L = 0]."""
        return [self.n] + list(self.b[: self.L - 1]) + [0]


def schedule_step(s: Schedule) -> Schedule:
    """One pass of the recursive boundary update, in place."""
    n = s.n + 1
    B = s.B
    if 2 * B**s.L == n + 1:
        s.L += 1
    while len(s.q) < s.L:
        s.q.append(0)
    k = 1
    while (n + 1) % B**k == 0 and k < s.L:
        s.q[k - 1] += 1
        k += 1
    s.b = [s.q[k - 1] * B**k for k in range(1, s.L)]
    s.n = n
    return s


def block_start(k: int, m: int, B: int) -> int:
    """Closed form of b(k) when the sum runs over j < m (m = n + 1)."""
    if k == 0:
        return m - 1
    P = B**k
    return P * max(0, m // P - 1)


def level_count(n: int, B: int) -> int:
    """Smallest L with n + 1 < 2 B^L."""
    L = 1
    while n + 1 >= 2 * B**L:
        L += 1
    return L


@dataclass
class EngineConfig:
    """Parameters of the fast convolution.

    ``B`` and ``K`` default to the values of ``profile``. Level 2 holds the
    smallest lags (from B on), where e_n(h lam) decays only algebraically
    along the contour; it gets ``level2_extra_nodes`` more nodes and, unless
    ``level2_contour`` is None, its own contour kind.
    """

    B: int | None = None
    K: int | None = None
    contour: str = "hyperbola"
    profile: str = "accurate"
    real: bool = True
    level2_contour: str | None = "hyperbola"
    level2_extra_nodes: int = 10

    def resolved(self):
        B0, K0 = PROFILES[self.profile]
        B = B0 if self.B is None else self.B
        K = K0 if self.K is None else self.K
        if B < 2:
            raise ValueError("B must be >= 2")
        if K < 1:
            raise ValueError("K must be >= 1")
        return B, K


@dataclass
class MemoryReport:
    stored_scalars: int
    per_unknown: float
    window_entries: int
    active_slots: int
    levels: int
    peak_per_unknown: float
    slots_by_level: dict


class _Level:
    """Contour data of one level; shared by all unknowns."""

    def __init__(self, ell, kernel, method, h, B, K, cfg, stages):
        kind = cfg.contour
        if ell == 2 and cfg.level2_contour:
            kind = cfg.level2_contour
        spec = interval_params(ell, B, h, kind=kind, profile=cfg.profile, K=K, vertex_c=kernel.vertex_c)
        if ell == 2:
            spec = replace(spec, K=spec.K + cfg.level2_extra_nodes)
        rule = spec.rule()
        if cfg.real:
            lam, w, mult = rule.upper_half()
        else:
            lam, w, mult = rule.nodes, rule.weights, np.ones(len(rule))
        self.ell = ell
        self.K = K
        self.P = B ** (ell - 1)
        self.Q = B**ell
        self.nodes = lam
        self.F = kernel(lam)
        r, q, lift = method.components(h * lam)
        self.r = r  # (nn, C)
        self.hq = h * q  # (nn, C, m)
        self.coef = (mult * w * self.F)[:, None] * r  # (nn, C), end value
        self.coef_stage = self.coef[..., None] * lift if stages else None  # (nn, C, m)


class _Pack:
    """Slots of all levels sharing one node count, stacked in one array.

    ``rows`` lists (level, kind, start) per slot; the index arrays used in
    every step are rebuilt only when the slot table changes.
    """

    def __init__(self, levels, state_shape, data_ndim):
        self.levels = levels
        self.state_shape = state_shape
        self.pad = (1,) * data_ndim
        self.rows = []
        self.S = np.zeros((0,) + state_shape, dtype=complex)
        self.dirty = True

    def find(self, lv, kind):
        for a, row in enumerate(self.rows):
            if row[0] is lv and row[1] == kind:
                return a
        return None

    def append(self, lv, kind, start, values=None):
        self.rows.append((lv, kind, start))
        values = np.zeros(self.state_shape, dtype=complex) if values is None else values
        self.S = np.concatenate([self.S, values[None]])
        self.dirty = True

    def add_into(self, lv, kind, start, values):
        a = self.find(lv, kind)
        if a is None:
            self.append(lv, kind, start, values)
        else:
            self.S[a] += values

    def drop(self, a):
        del self.rows[a]
        self.S = np.delete(self.S, a, axis=0)
        self.dirty = True

    def relabel(self, a, kind, start=None):
        lv, _, s = self.rows[a]
        self.rows[a] = (lv, kind, s if start is None else start)
        self.dirty = True

    def rebuild(self):
        self.dirty = False
        kind = np.array([r[1] for r in self.rows], dtype=int)
        lvs = [r[0] for r in self.rows]
        if lvs:
            R = np.stack([lv.r for lv in lvs])
            self.R = R.reshape(R.shape + self.pad)
        self.run_idx = np.flatnonzero(kind == RUN)
        self.run_hq = np.stack([lvs[a].hq for a in self.run_idx]) if len(self.run_idx) else None
        self.out_idx = np.flatnonzero((kind == OLD) | (kind == NXT))
        has = len(self.out_idx) > 0
        self.out_coef = np.stack([lvs[a].coef for a in self.out_idx]) if has else None
        self.out_coef_stage = (np.stack([lvs[a].coef_stage for a in self.out_idx])
                               if has and lvs[self.out_idx[0]].coef_stage is not None else None)

    def advance(self, g):
        """Multiply every slot by r and feed g into the running slots; returns mult count."""
        if self.dirty:
            self.rebuild()
        if not self.rows:
            return 0
        self.S *= self.R
        count = self.S.size
        if len(self.run_idx):
            self.S[self.run_idx] += np.tensordot(self.run_hq, g, axes=([3], [0]))
            count += self.run_hq.size * int(np.prod(g.shape[1:], dtype=int))
        return count

    def output(self, stage_out):
        if self.dirty:
            self.rebuild()
        if not len(self.out_idx):
            return None, 0
        S = self.S[self.out_idx]
        if stage_out:
            coef = self.out_coef_stage
            out = np.tensordot(coef, S, axes=([0, 1, 2], [0, 1, 2]))
        else:
            coef = self.out_coef
            out = np.tensordot(coef, S, axes=3)
        return out, coef.size * int(np.prod(S.shape[3:], dtype=int))


class ConvolutionEngine:
    """Step-by-step fast convolution u_{n+1} = sum_{j<=n} omega_{n-j} g_j.

    Parameters
    ----------
    kernel : SectorialTransform
    method : stepper from :mod:`fastcq.stepgen`
    h : float
        Step size.
    n_max : int
        Number of steps that will be fed. Every level must integrate its ODEs
        from the first step on, so the levels are fixed at construction.
    config : EngineConfig, optional
    data_shape : tuple
        Shape of one data value, () for scalar data or (d,).
    stages : bool
        Runge-Kutta only: also allow full stage vectors sum W_{n-j} g_j from
        :meth:`history`.
    """

    def __init__(self, kernel, method, h: float, n_max: int, config: EngineConfig | None = None,
                 data_shape=(), stages: bool = False):
        if not h > 0:
            raise ValueError("h must be positive")
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        self.config = cfg = config or EngineConfig()
        self.B, self.K = B, K = cfg.resolved()
        self.kernel, self.method, self.h = kernel, method, h
        self.n_max = n_max
        self.data_shape = tuple(data_shape)
        self.dsize = int(np.prod(self.data_shape, dtype=int))
        self.m = method.stages
        self.stages = bool(stages) and self.m > 1
        self.dtype = float if cfg.real else complex

        self.weights = weights_circle(kernel, method, h, 2 * B - 1)
        W = self.weights.matrices
        self._wmat = W.real if cfg.real else W.astype(complex)
        om = self.weights.omega
        om = om.real if cfg.real else om.astype(complex)
        self._omega = om[:, None] if self.m == 1 else om
        self.kernel_evals = self.weights.ncirc
        self.cmults = 0

        # history() after the last push sums over j < n_max + 1
        ell_max = 1
        while 2 * B**ell_max <= n_max + 1:
            ell_max += 1
        self.levels = []
        self._packs = {}
        C = method.n_components
        for ell in range(2, ell_max + 1):
            lv = _Level(ell, kernel, method, h, B, K, cfg, self.stages)
            self.kernel_evals += len(lv.nodes)
            nn = len(lv.nodes)
            if nn not in self._packs:
                self._packs[nn] = _Pack(self.levels, (nn, C) + self.data_shape, len(self.data_shape))
            lv.pack = self._packs[nn]
            if ell > 2:
                lv.pack.append(lv, RUN, 0)
            self.levels.append(lv)

        self._buf = np.zeros((2 * B, self.m) + self.data_shape, dtype=self.dtype)
        self._win_start = 0
        self.n = 0
        self._slot_scalars = self._count_slot_scalars()
        self._peak = self._slot_scalars / self.dsize

    def _as_data(self, g):
        g = np.asarray(g)
        if self.config.real and np.iscomplexobj(g):
            raise ValueError("complex data fed to an engine configured for real data")
        shape = (self.m,) + self.data_shape
        if self.m == 1 and g.shape == self.data_shape:
            g = g.reshape(shape)
        if g.shape != shape:
            raise ValueError(f"expected data of shape {shape}, got {g.shape}")
        return g.astype(self.dtype, copy=False)

    # ------------------------------------------------------------------ evaluation
    def _bank_sum(self, stage_out):
        total = None
        for pack in self._packs.values():
            out, count = pack.output(stage_out)
            if out is not None:
                self.cmults += count
                total = out if total is None else total + out
        if total is None:
            return None
        return total.real if self.config.real else total

    def _window(self, upto):
        """Direct part over j = win_start..upto-1 with lags n - j."""
        idx = np.arange(self._win_start, upto)
        return idx, self.n - idx, self._buf[idx % (2 * self.B)]

    def history(self, stages: bool | None = None):
        """sum_{j<n} W_{n-j} g_j for the next index n (lags >= 1).

        Returns the last-row sum (shape data_shape) or, with ``stages`` for
        Runge-Kutta methods, the stage vector (m,) + data_shape.
        """
        stage_out = self.stages if stages is None else (bool(stages) and self.m > 1)
        if stage_out and not self.stages:
            raise ValueError("engine was built without stage output")
        idx, lags, block = self._window(self.n)
        if stage_out:
            acc = np.einsum("kab,kb...->a...", self._wmat[lags], block)
            self.cmults += len(idx) * self.m * self.m * self.dsize
        else:
            acc = window_sum(self._omega[lags], block) if len(idx) else np.zeros(self.data_shape, self.dtype)
            self.cmults += len(idx) * self.m * self.dsize
        bank = self._bank_sum(stage_out)
        return acc if bank is None else acc + bank

    def step(self, g):
        """Feed g_n and return u_{n+1} = sum_{j<=n} omega_{n-j} g_j."""
        g = self._as_data(g)
        self._check_horizon()
        self._buf[self.n % (2 * self.B)] = g
        idx, lags, block = self._window(self.n + 1)
        u = window_sum(self._omega[lags], block)
        self.cmults += len(idx) * self.m * self.dsize
        bank = self._bank_sum(False)
        if bank is not None:
            u = u + bank
        self._advance(g)
        return u

    def push(self, g):
        """Feed g_n without producing output."""
        g = self._as_data(g)
        self._check_horizon()
        self._buf[self.n % (2 * self.B)] = g
        self._advance(g)

    def _check_horizon(self):
        if self.n >= self.n_max:
            raise RuntimeError(f"engine horizon n_max={self.n_max} exhausted")

    def _advance(self, g):
        for pack in self._packs.values():
            self.cmults += pack.advance(g)
        n = self.n  # index of the value just fed
        c = n + 1
        m_next = n + 2
        changed = False
        for lv in self.levels:
            pack = lv.pack
            if lv.ell > 2 and c % lv.P == 0:
                pack.relabel(pack.find(lv, RUN), PEND, c - lv.P)
                pack.append(lv, RUN, c)
                changed = True
            hi_new, hi_old = block_start(lv.ell - 1, m_next, self.B), block_start(lv.ell - 1, c, self.B)
            if hi_new == hi_old:
                continue
            changed = True
            lo_new, lo_old = block_start(lv.ell, m_next, self.B), block_start(lv.ell, c, self.B)
            if lo_new != lo_old:
                a = pack.find(lv, OLD)
                if a is not None:
                    pack.drop(a)
                a = pack.find(lv, NXT)
                if a is not None:
                    pack.relabel(a, OLD)
            dest = NXT if hi_old >= lo_new + lv.Q else OLD
            if lv.ell == 2:
                chunk = self._chunk_from_window(lv, hi_old, hi_new, n)
            else:
                a = pack.find(lv, PEND)
                if pack.rows[a][2] != hi_old:
                    raise AssertionError("pending chunk does not start at the block boundary")
                chunk = pack.S[a].copy()
                pack.drop(a)
            pack.add_into(lv, dest, hi_old, chunk)
        self.n = c
        self._win_start = block_start(1, m_next, self.B)
        if c - self._win_start + 1 > 2 * self.B:
            raise AssertionError("direct window exceeds 2B entries")
        if changed:
            self._slot_scalars = self._count_slot_scalars()
        stored = (self.n - self._win_start) * self.m * self.dsize + self._slot_scalars
        self._peak = max(self._peak, stored / self.dsize)

    def _chunk_from_window(self, lv, j0, j1, n):
        """State after feeding g_{j0}..g_{j1-1} from zero and advancing to step n."""
        pad = (1,) * len(self.data_shape)
        r = lv.r.reshape(lv.r.shape + pad)
        acc = np.zeros(lv.pack.state_shape, dtype=complex)
        for j in range(j0, j1):
            acc = acc * r + np.tensordot(lv.hq, self._buf[j % (2 * self.B)], axes=([2], [0]))
        for _ in range(n - j1 + 1):
            acc = acc * r
        self.cmults += (j1 - j0) * lv.hq.size * self.dsize + (n - j0 + 1) * acc.size
        return acc

    # ------------------------------------------------------------------ reporting
    def _count_slot_scalars(self):
        return sum(len(p.rows) * p.state_shape[0] * p.state_shape[1] for p in self._packs.values()) * self.dsize

    def memory_report(self, track=True) -> MemoryReport:
        """Exact counts of the stored data-dependent scalars.

        Contour data (nodes, weights, r, F) are shared by all unknowns and
        not counted; complex values count as one entry.
        """
        window = self.n - self._win_start
        stored = window * self.m * self.dsize
        slots, by_level = 0, {}
        for pack in self._packs.values():
            per_slot = pack.state_shape[0] * pack.state_shape[1] * self.dsize
            stored += len(pack.rows) * per_slot
            slots += len(pack.rows)
            for lv, kind, _ in pack.rows:
                by_level.setdefault(lv.ell, []).append(SLOT_NAMES[kind])
        per_unknown = stored / self.dsize
        peak = max(self._peak, per_unknown) if track else per_unknown
        return MemoryReport(stored_scalars=stored, per_unknown=per_unknown, window_entries=window,
                            active_slots=slots, levels=len(self.levels), peak_per_unknown=peak,
                            slots_by_level=dict(sorted(by_level.items())))

    def slot_states(self):
        """Live slots as {(ell, name): (start, state)}; for inspection and tests."""
        out = {}
        for pack in self._packs.values():
            for a, (lv, kind, start) in enumerate(pack.rows):
                out[(lv.ell, SLOT_NAMES[kind])] = (start, pack.S[a].copy())
        return out


def fast_convolve(kernel, method, h: float, g, config: EngineConfig | None = None):
    """u_n = sum_{j<=n} omega_{n-j} g_j for all n, computed with the engine.

    ``g`` is indexed along its first axis; for Runge-Kutta methods each entry
    holds the stage values.
    """
    g = np.asarray(g)
    m = method.stages
    data_shape = g.shape[2:] if m > 1 else g.shape[1:]
    eng = ConvolutionEngine(kernel, method, h, len(g), config, data_shape=data_shape)
    out = np.stack([eng.step(gj) for gj in g])
    return out, eng
