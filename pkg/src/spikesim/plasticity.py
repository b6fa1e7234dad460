"""Synapse populations and the two weight-update rules.

Phase 1 uses pair-based additive STDP with all-to-all spike interaction,
implemented through exponential eligibility traces: every pre spike depresses
its synapses in proportion to the post trace and then bumps the pre trace;
every post spike potentiates in proportion to the pre trace and then bumps the
post trace. Updates are scaled by W_max and clipped to the allowed band after
every event. For coincident pre/post spikes in the same step the pre event is
processed first, so the pair contributes potentiation (never sees itself as
depression).

Phase 2 uses a supervised rule driven by a teacher spike train: at the end of
a presentation each synapse receives

    dw = W_max * [ sum over (teacher, pre) causal pairs of W(t_d - t_i)
                   - sum over (actual, pre) causal pairs of W(t_o - t_i) ]

with the learning window W(s) = A * exp(-s / tau) for s > 0 and exactly 0
otherwise. A teacher train identical to the actual output train yields exactly
zero update. Window amplitude A is positive for excitatory projections and
negative for inhibitory ones.

Weight sign discipline: excitatory weights live in [W_min, W_max], inhibitory
in [-W_max, -W_min] (parameters store magnitudes; the projection's sign picks
the direction, and "potentiation" always grows |w|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .records import SpikeRecord

SIGNS = ("excitatory", "inhibitory")


@dataclass(frozen=True)
class StdpParams:
    """Additive pair-STDP constants. W_max / W_min are magnitudes (pA)."""

    A_plus: float = 0.001       # potentiation rate per causal pair
    A_minus: float = 0.0005     # depression rate per anti-causal pair
    tau_trace: float = 10.0     # trace time constant (ms), pre and post alike
    W_max: float = 1200.0
    W_min: float = 0.0

    def __post_init__(self) -> None:
        if self.A_plus < 0.0 or self.A_minus < 0.0:
            raise ValueError("STDP rates must be non-negative")
        if not self.tau_trace > 0.0:
            raise ValueError("tau_trace must be positive")
        if not (0.0 <= self.W_min <= self.W_max):
            raise ValueError("need 0 <= W_min <= W_max")


@dataclass(frozen=True)
class ResumeParams:
    """Supervised-window constants. A carries the projection's sign."""

    A: float = 0.001            # window amplitude (>0 excitatory, <0 inhibitory)
    tau: float = 10.0           # window time constant (ms)
    W_max: float = 1200.0       # magnitude bound (pA)
    W_min: float = 0.0

    def __post_init__(self) -> None:
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if not (0.0 <= self.W_min <= self.W_max):
            raise ValueError("need 0 <= W_min <= W_max")


def excitatory_stdp() -> StdpParams:
    """Default excitatory STDP parameter set."""
    return StdpParams(A_plus=0.001, A_minus=0.0005, tau_trace=10.0, W_max=1200.0)


def inhibitory_stdp() -> StdpParams:
    """Default inhibitory STDP parameter set (magnitudes; sign via projection)."""
    return StdpParams(A_plus=0.001, A_minus=0.0005, tau_trace=10.0, W_max=1200.0)


def excitatory_resume() -> ResumeParams:
    return ResumeParams(A=0.001, tau=10.0, W_max=1200.0)


def inhibitory_resume() -> ResumeParams:
    return ResumeParams(A=-0.001, tau=10.0, W_max=1200.0)


@dataclass
class SynapsePopulation:
    """One projection: parallel connection arrays plus plasticity state.

    pre_index / post_index are population-local ids; weight is signed pA.
    `plasticity` is None for a static projection, StdpParams or ResumeParams
    otherwise. Traces exist only in stdp mode. `delay` is in simulation steps.
    """

    name: str
    pre_index: np.ndarray
    post_index: np.ndarray
    weight: np.ndarray
    sign: str
    n_pre: int
    n_post: int
    plasticity: StdpParams | ResumeParams | None = None
    delay: int = 1
    pre_trace: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    post_trace: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.sign not in SIGNS:
            raise ValueError(f"unknown synapse sign {self.sign!r}")
        self.pre_index = np.asarray(self.pre_index, dtype=np.int64)
        self.post_index = np.asarray(self.post_index, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if not (self.pre_index.shape == self.post_index.shape == self.weight.shape):
            raise ValueError("connection arrays must have identical shapes")
        if self.pre_index.size:
            if self.pre_index.min() < 0 or self.pre_index.max() >= self.n_pre:
                raise ValueError("pre_index out of range")
            if self.post_index.min() < 0 or self.post_index.max() >= self.n_post:
                raise ValueError("post_index out of range")
        if self.delay < 1:
            raise ValueError("delay must be at least one step")
        self._check_weights()
        if self.pre_trace is None:
            self.pre_trace = np.zeros(self.n_pre, dtype=np.float64)
        if self.post_trace is None:
            self.post_trace = np.zeros(self.n_post, dtype=np.float64)
        self._by_pre = None
        self._by_post = None

    # -- structure ------------------------------------------------------

    @property
    def n_connections(self) -> int:
        return int(self.weight.size)

    @property
    def mode(self) -> str:
        if self.plasticity is None:
            return "static"
        return "stdp" if isinstance(self.plasticity, StdpParams) else "resume"

    def _check_weights(self) -> None:
        w = self.weight
        if not np.all(np.isfinite(w)):
            raise ValueError(f"{self.name}: non-finite weight")
        if self.sign == "excitatory":
            if w.size and w.min() < 0.0:
                raise ValueError(f"{self.name}: negative excitatory weight")
        elif w.size and w.max() > 0.0:
            raise ValueError(f"{self.name}: positive inhibitory weight")

    def _bounds(self) -> tuple[float, float]:
        p = self.plasticity
        w_max = p.W_max if p is not None else np.inf
        w_min = p.W_min if p is not None else 0.0
        if self.sign == "excitatory":
            return (w_min, w_max)
        return (-w_max, -w_min)

    def connections_by_pre(self, pre_ids: np.ndarray) -> np.ndarray:
        """Indices into the connection arrays for the given pre neurons."""
        if self._by_pre is None:
            order = np.argsort(self.pre_index, kind="stable")
            starts = np.searchsorted(self.pre_index[order], np.arange(self.n_pre + 1))
            self._by_pre = (order, starts)
        order, starts = self._by_pre
        pre_ids = np.atleast_1d(pre_ids)
        if pre_ids.size == 0:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([order[starts[i]:starts[i + 1]] for i in pre_ids])

    def connections_by_post(self, post_ids: np.ndarray) -> np.ndarray:
        if self._by_post is None:
            order = np.argsort(self.post_index, kind="stable")
            starts = np.searchsorted(self.post_index[order], np.arange(self.n_post + 1))
            self._by_post = (order, starts)
        order, starts = self._by_post
        post_ids = np.atleast_1d(post_ids)
        if post_ids.size == 0:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([order[starts[i]:starts[i + 1]] for i in post_ids])

    def copy(self) -> "SynapsePopulation":
        return SynapsePopulation(
            name=self.name, pre_index=self.pre_index.copy(),
            post_index=self.post_index.copy(), weight=self.weight.copy(),
            sign=self.sign, n_pre=self.n_pre, n_post=self.n_post,
            plasticity=self.plasticity, delay=self.delay,
            pre_trace=self.pre_trace.copy(), post_trace=self.post_trace.copy(),
        )


# -- STDP -----------------------------------------------------------------


def _require_stdp(pop: SynapsePopulation) -> StdpParams:
    if pop.mode != "stdp":
        raise ValueError(f"{pop.name}: operation requires stdp mode, pop is {pop.mode}")
    return pop.plasticity  # type: ignore[return-value]


def decay_traces(pop: SynapsePopulation, dt: float) -> SynapsePopulation:
    """Advance all eligibility traces by dt ms (multiplicative decay)."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if pop.mode == "stdp":
        f = math.exp(-dt / pop.plasticity.tau_trace)  # type: ignore[union-attr]
        pop.pre_trace *= f
        pop.post_trace *= f
    return pop


def stdp_on_pre(pop: SynapsePopulation, pre_neuron, t: float) -> SynapsePopulation:
    """Apply the pre-spike event: depress from the post trace, bump pre trace.

    `pre_neuron` may be an int or an array of distinct ids spiking this step.
    Traces must already be decayed to time t.
    """
    p = _require_stdp(pop)
    ids = np.atleast_1d(np.asarray(pre_neuron, dtype=np.int64))
    if ids.size and (ids.min() < 0 or ids.max() >= pop.n_pre):
        raise IndexError(f"{pop.name}: pre id out of range")
    conns = pop.connections_by_pre(ids)
    if conns.size:
        step = p.A_minus * p.W_max * pop.post_trace[pop.post_index[conns]]
        w = pop.weight[conns]
        if pop.sign == "excitatory":
            w -= step
        else:
            w += step   # depression shrinks |w|
        lo, hi = pop._bounds()
        pop.weight[conns] = np.clip(w, lo, hi)
    pop.pre_trace[ids] += 1.0
    return pop


def stdp_on_post(pop: SynapsePopulation, post_neuron, t: float) -> SynapsePopulation:
    """Apply the post-spike event: potentiate from the pre trace, bump post trace."""
    p = _require_stdp(pop)
    ids = np.atleast_1d(np.asarray(post_neuron, dtype=np.int64))
    if ids.size and (ids.min() < 0 or ids.max() >= pop.n_post):
        raise IndexError(f"{pop.name}: post id out of range")
    conns = pop.connections_by_post(ids)
    if conns.size:
        step = p.A_plus * p.W_max * pop.pre_trace[pop.pre_index[conns]]
        w = pop.weight[conns]
        if pop.sign == "excitatory":
            w += step
        else:
            w -= step   # potentiation grows |w|
        lo, hi = pop._bounds()
        pop.weight[conns] = np.clip(w, lo, hi)
    pop.post_trace[ids] += 1.0
    return pop


# -- supervised window rule ------------------------------------------------


def resume_window(s, params: ResumeParams) -> np.ndarray | float:
    """Learning window W(s) = A * exp(-s / tau) for s > 0, exactly 0 otherwise."""
    s_arr = np.asarray(s, dtype=np.float64)
    out = np.where(s_arr > 0.0, params.A * np.exp(-s_arr / params.tau), 0.0)
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def _causal_kernel_sums(pre_times: list[np.ndarray], event_times: np.ndarray,
                        params: ResumeParams) -> np.ndarray:
    """For each pre neuron: sum of W(t_event - t_pre) over all causal pairs."""
    out = np.zeros(len(pre_times), dtype=np.float64)
    if event_times.size == 0:
        return out
    for i, tp in enumerate(pre_times):
        if tp.size == 0:
            continue
        d = event_times[None, :] - tp[:, None]
        k = np.where(d > 0.0, params.A * np.exp(-d / params.tau), 0.0)
        out[i] = k.sum()
    return out


def resume_update(pop: SynapsePopulation, teacher_spikes: SpikeRecord,
                  actual_spikes: SpikeRecord, pre_spikes: SpikeRecord,
                  window: float) -> SynapsePopulation:
    """Batch weight update for one presentation window.

    teacher_spikes / actual_spikes index the post population, pre_spikes the
    pre population. Identical teacher and actual trains cancel exactly.
    """
    if pop.mode != "resume":
        raise ValueError(f"{pop.name}: operation requires resume mode, pop is {pop.mode}")
    p: ResumeParams = pop.plasticity  # type: ignore[assignment]
    if teacher_spikes.n_neurons != pop.n_post or actual_spikes.n_neurons != pop.n_post:
        raise ValueError(f"{pop.name}: post spike records must cover {pop.n_post} neurons")
    if pre_spikes.n_neurons != pop.n_pre:
        raise ValueError(f"{pop.name}: pre spike record must cover {pop.n_pre} neurons")
    for rec in (teacher_spikes, actual_spikes, pre_spikes):
        for i, t in enumerate(rec.times):
            if t.size and (t[0] < 0.0 or t[-1] >= window):
                raise ValueError(f"spike time outside [0, {window})")
            if t.size > 1 and not np.all(np.diff(t) > 0.0):
                raise ValueError("unsorted spike record")

    # S[i, j] = causal kernel sum of pre neuron i against post neuron j's events
    n_pre, n_post = pop.n_pre, pop.n_post
    S = np.zeros((n_pre, n_post), dtype=np.float64)
    for j in range(n_post):
        td, to = teacher_spikes.times[j], actual_spikes.times[j]
        if td.size == to.size and np.array_equal(td, to):
            continue    # identical trains cancel exactly; skip the arithmetic
        if td.size:
            S[:, j] += _causal_kernel_sums(pre_spikes.times, td, p)
        if to.size:
            S[:, j] -= _causal_kernel_sums(pre_spikes.times, to, p)

    pop.weight += p.W_max * S[pop.pre_index, pop.post_index]
    lo, hi = pop._bounds()
    np.clip(pop.weight, lo, hi, out=pop.weight)
    return pop


def freeze(pop: SynapsePopulation) -> SynapsePopulation:
    """Make the projection static, preserving weights bit-exactly. Idempotent."""
    pop.plasticity = None
    pop.pre_trace.fill(0.0)
    pop.post_trace.fill(0.0)
    return pop
