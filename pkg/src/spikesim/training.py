"""Simulation engine and the two-phase training protocol.

A presentation runs one image for `window` ms in steps of `dt`: the input
layer receives the encoded DC currents, spikes propagate through every
projection with a one-step synaptic delay, and (in phase 1) STDP events fire
online as spikes happen. All neuron state and all eligibility traces are
cleared at the start of every presentation, so presentations are independent
and checkpoints at presentation boundaries are exact resume points.

Phase 1 trains input->feature, feature->inhib, and inhib->feature with STDP
while the readout projections stay static. Phase 2 freezes those three and
trains feature->readout (and optionally the lateral readout inhibition) with
the supervised window rule, applied once per presentation against the
presented class's teacher train. Classification is winner-takes-all over
summed per-class readout spike counts, ties resolved to the lowest class
index and flagged.

Everything is deterministic given the seeds: dataset order is fixed unless a
shuffle seed is supplied (per-epoch order then derives statelessly from
(shuffle_seed, epoch)), and no other step consumes randomness.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataio import Dataset, ImageSample, checkpoint_from_network, save_checkpoint
from .encoding import EncodingConfig, encode_image
from .neuron import new_state, step_neuron, deliver_spike
from .plasticity import (SynapsePopulation, decay_traces, excitatory_resume,
                         excitatory_stdp, freeze, inhibitory_resume,
                         inhibitory_stdp, resume_update, stdp_on_post,
                         stdp_on_pre)
from .records import SpikeRecord
from .topology import NetworkTopology, attach_teachers, teacher_train

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationConfig:
    """Clock and protocol constants for simulation and training."""

    dt: float = 0.1                 # step size (ms)
    window: float = 100.0           # presentation length (ms)
    epochs_phase1: int = 5
    epochs_phase2: int = 5
    checkpoint_interval: int = 500  # presentations between checkpoints
    seed: int = 0
    shuffle_seed: int | None = None  # None = fixed dataset order

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        n = round(self.window / self.dt)
        if n < 1 or abs(n * self.dt - self.window) > 1e-6:
            raise ValueError(
                f"window {self.window} must be a positive multiple of dt {self.dt}")
        if self.epochs_phase1 < 0 or self.epochs_phase2 < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.checkpoint_interval < 1:
            raise ValueError("checkpoint_interval must be positive")

    @property
    def n_steps(self) -> int:
        return round(self.window / self.dt)


@dataclass(frozen=True)
class ClassificationResult:
    predicted: int
    class_counts: np.ndarray    # summed spikes per class group
    neuron_counts: np.ndarray   # spikes per readout neuron
    tie: bool


@dataclass(frozen=True)
class EvaluationReport:
    """Accuracy summary: one row per class present in the dataset."""

    overall: float
    class_ids: np.ndarray
    class_names: tuple[str, ...]
    per_class: np.ndarray
    n_per_class: np.ndarray
    mean_class: float           # mean of per_class rows
    std_class: float            # population std of per_class rows
    n_samples: int
    ties: int

    def render(self) -> str:
        lines = [f"{'class':<14} {'n':>5} {'accuracy':>9}"]
        for cid, name, acc, n in zip(self.class_ids, self.class_names,
                                     self.per_class, self.n_per_class):
            lines.append(f"{name:<14} {n:>5d} {100.0 * acc:>8.2f}%")
        lines.append(f"{'overall':<14} {self.n_samples:>5d} {100.0 * self.overall:>8.2f}%")
        lines.append(f"mean over classes: {100.0 * self.mean_class:.2f}% "
                     f"+- {100.0 * self.std_class:.3f}%")
        return "\n".join(lines)


@dataclass
class PhaseResult:
    net: NetworkTopology
    checkpoints: list[Path]
    epoch_stats: list[dict]


@dataclass(frozen=True)
class Trial:
    weight: float
    accuracy: float


@dataclass(frozen=True)
class SearchResult:
    best_weight: float
    trials: list[Trial]


# -- the presentation engine -------------------------------------------------


def _clear_traces(net: NetworkTopology) -> None:
    for pop in net.projections.values():
        pop.pre_trace.fill(0.0)
        pop.post_trace.fill(0.0)


def _pixels_of(img) -> np.ndarray:
    return img.pixels if isinstance(img, ImageSample) else np.asarray(img, dtype=np.float64)


def present_image(net: NetworkTopology, img, sim: SimulationConfig,
                  enc: EncodingConfig, plastic: bool = False) -> SpikeRecord:
    """Run one presentation; returns the spike record over all neurons.

    With plastic=True the STDP projections update online; the supervised rule
    is a batch update owned by run_phase2 (it needs the label). Neuron state
    and traces are reset on entry, so back-to-back calls are independent.
    """
    px = _pixels_of(img)
    cfg = net.config
    if px.shape != (cfg.rows, cfg.cols):
        raise ValueError(f"image shape {px.shape} != ({cfg.rows}, {cfg.cols})")
    if abs(enc.window - sim.window) > 1e-9:
        raise ValueError(
            f"encoding window {enc.window} != simulation window {sim.window}")
    params = net.params
    dt = sim.dt
    n = net.n_neurons

    I_ext = np.zeros(n, dtype=np.float64)
    I_ext[net.input_layer.start:net.input_layer.stop] = encode_image(px, enc)

    state = new_state(n, params)
    _clear_traces(net)

    # static per-presentation wiring info, in fixed projection order
    proj_info = []
    for pop in net.ordered_projections():
        pre_layer = {"input_feat": net.input_layer, "feat_inhib": net.feature_layer,
                     "inhib_feat": net.inhib_layer, "feat_readout": net.feature_layer,
                     "readout_lateral": net.readout_layer}[pop.name]
        post_layer = {"input_feat": net.feature_layer, "feat_inhib": net.inhib_layer,
                      "inhib_feat": net.feature_layer, "feat_readout": net.readout_layer,
                      "readout_lateral": net.readout_layer}[pop.name]
        post_global = pop.post_index + post_layer.start
        proj_info.append((pop, pre_layer, post_layer, post_global))

    pend_ex = np.zeros(n, dtype=np.float64)
    pend_in = np.zeros(n, dtype=np.float64)
    events: list[tuple[int, np.ndarray]] = []

    for k in range(sim.n_steps):
        if pend_ex.any():
            deliver_spike(state, pend_ex, "excitatory", params)
            pend_ex.fill(0.0)
        if pend_in.any():
            deliver_spike(state, pend_in, "inhibitory", params)
            pend_in.fill(0.0)

        state, spiked = step_neuron(state, params, I_ext, dt, validate=(k == 0))
        if not spiked.any():
            if plastic:
                for pop, *_ in proj_info:
                    if pop.mode == "stdp":
                        decay_traces(pop, dt)
            continue
        t = k * dt
        events.append((k, np.flatnonzero(spiked)))

        for pop, pre_layer, post_layer, post_global in proj_info:
            pre_local = np.flatnonzero(spiked[pre_layer.start:pre_layer.stop])
            if plastic and pop.mode == "stdp":
                decay_traces(pop, dt)
                post_local = np.flatnonzero(spiked[post_layer.start:post_layer.stop])
                if pre_local.size:
                    stdp_on_pre(pop, pre_local, t)
                if post_local.size:
                    stdp_on_post(pop, post_local, t)
            if pre_local.size:
                # queue deliveries for the next step (one-step delay), using
                # the weights as updated by this step's plasticity events
                conns = pop.connections_by_pre(pre_local)
                pend = pend_ex if pop.sign == "excitatory" else pend_in
                pend += np.bincount(post_global[conns], weights=pop.weight[conns],
                                    minlength=n)

    return SpikeRecord.from_step_events(events, n, dt, sim.window)


# -- phase orchestration -----------------------------------------------------


def set_phase1_modes(net: NetworkTopology) -> NetworkTopology:
    """STDP on the three lower projections, readout projections static."""
    net.projections["input_feat"].plasticity = excitatory_stdp()
    net.projections["feat_inhib"].plasticity = excitatory_stdp()
    net.projections["inhib_feat"].plasticity = inhibitory_stdp()
    freeze(net.projections["feat_readout"])
    freeze(net.projections["readout_lateral"])
    _clear_traces(net)
    return net


def set_phase2_modes(net: NetworkTopology) -> NetworkTopology:
    """Freeze the STDP projections; supervised rule on the readout wiring."""
    for name in ("input_feat", "feat_inhib", "inhib_feat"):
        freeze(net.projections[name])
    net.projections["feat_readout"].plasticity = excitatory_resume()
    if net.config.train_readout_lateral:
        net.projections["readout_lateral"].plasticity = inhibitory_resume()
    else:
        freeze(net.projections["readout_lateral"])
    return net


def _epoch_order(n: int, epoch: int, sim: SimulationConfig) -> np.ndarray:
    if sim.shuffle_seed is None:
        return np.arange(n)
    rng = np.random.default_rng((sim.shuffle_seed, epoch))
    return rng.permutation(n)


def _weight_stats(net: NetworkTopology) -> dict:
    out = {}
    for pop in net.ordered_projections():
        w = pop.weight
        out[pop.name] = {"mean": float(w.mean()) if w.size else 0.0,
                         "min": float(w.min()) if w.size else 0.0,
                         "max": float(w.max()) if w.size else 0.0}
    return out


class _CheckpointTrail:
    """Writes interval + final checkpoints and the jsonl run log."""

    def __init__(self, out_dir: Path | None, phase: int, sim: SimulationConfig,
                 net: NetworkTopology):
        self.out_dir = out_dir
        self.phase = phase
        self.sim = sim
        self.net = net
        self.rng = np.random.default_rng(sim.seed)
        self.paths: list[Path] = []
        self.log_lines: list[str] = []
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)

    def _save(self, counter: int, final: bool) -> None:
        if self.out_dir is None:
            return
        tag = "final" if final else f"{counter:08d}"
        path = self.out_dir / f"ckpt_phase{self.phase}_{tag}.bin"
        ckpt = checkpoint_from_network(self.net, self.phase, counter, rng=self.rng)
        save_checkpoint(ckpt, path)
        self.paths.append(path)

    def maybe_save(self, counter: int) -> None:
        if counter % self.sim.checkpoint_interval == 0:
            self._save(counter, final=False)

    def finish(self, counter: int) -> None:
        self._save(counter, final=True)
        if self.out_dir is not None:
            log_path = self.out_dir / f"phase{self.phase}_log.jsonl"
            log_path.write_text("".join(self.log_lines))

    def log(self, record: dict) -> None:
        self.log_lines.append(json.dumps(record, sort_keys=True) + "\n")


def run_phase1(net: NetworkTopology, dataset: Dataset, sim: SimulationConfig,
               enc: EncodingConfig, out_dir: str | Path | None = None,
               start_presentation: int = 0) -> PhaseResult:
    """Unsupervised feature training: STDP over epochs of presentations."""
    set_phase1_modes(net)
    out = Path(out_dir) if out_dir is not None else None
    trail = _CheckpointTrail(out, 1, sim, net)
    if len(dataset) == 0:
        logger.warning("phase 1: empty dataset, nothing to train")
    counter = 0
    epoch_stats: list[dict] = []
    for epoch in range(sim.epochs_phase1):
        for idx in _epoch_order(len(dataset), epoch, sim):
            if counter < start_presentation:
                counter += 1
                continue
            present_image(net, dataset[int(idx)], sim, enc, plastic=True)
            counter += 1
            trail.maybe_save(counter)
        stats = {"event": "epoch", "phase": 1, "epoch": epoch + 1,
                 "presentations": counter, "weights": _weight_stats(net)}
        epoch_stats.append(stats)
        trail.log(stats)
        logger.info("phase 1 epoch %d/%d done (%d presentations)",
                    epoch + 1, sim.epochs_phase1, counter)
    trail.finish(counter)
    return PhaseResult(net=net, checkpoints=trail.paths, epoch_stats=epoch_stats)


def _teacher_record(net: NetworkTopology, label: int, sim: SimulationConfig,
                    enc: EncodingConfig) -> SpikeRecord:
    """Teacher spikes for the readout layer: the presented class's group gets
    the max-rate train, every other neuron stays silent."""
    train = teacher_train(sim.window, enc.target, sim.dt)
    times = [train if net.class_of[i] == label else np.empty(0)
             for i in range(net.readout_layer.size)]
    return SpikeRecord(times, sim.window)


def frozen_eval_net(net: NetworkTopology) -> NetworkTopology:
    frozen = net.copy()
    for pop in frozen.projections.values():
        freeze(pop)
    return frozen


def run_phase2(net: NetworkTopology, dataset: Dataset, sim: SimulationConfig,
               enc: EncodingConfig, out_dir: str | Path | None = None,
               start_presentation: int = 0,
               eval_each_epoch: bool = True) -> PhaseResult:
    """Supervised readout training against per-class teacher trains."""
    if not net.teachers_attached:
        attach_teachers(net)
    set_phase2_modes(net)
    out = Path(out_dir) if out_dir is not None else None
    trail = _CheckpointTrail(out, 2, sim, net)
    if len(dataset) == 0:
        logger.warning("phase 2: empty dataset, nothing to train")
    p4 = net.projections["feat_readout"]
    p5 = net.projections["readout_lateral"]
    feat, readout = net.feature_layer, net.readout_layer
    counter = 0
    epoch_stats: list[dict] = []
    for epoch in range(sim.epochs_phase2):
        for idx in _epoch_order(len(dataset), epoch, sim):
            if counter < start_presentation:
                counter += 1
                continue
            sample = dataset[int(idx)]
            record = present_image(net, sample, sim, enc, plastic=False)
            teacher = _teacher_record(net, sample.label, sim, enc)
            actual = record.subset(readout.start, readout.stop)
            pre = record.subset(feat.start, feat.stop)
            resume_update(p4, teacher, actual, pre, sim.window)
            if p5.mode == "resume":
                resume_update(p5, teacher, actual, actual, sim.window)
            counter += 1
            trail.maybe_save(counter)
        stats = {"event": "epoch", "phase": 2, "epoch": epoch + 1,
                 "presentations": counter, "weights": _weight_stats(net)}
        if eval_each_epoch and len(dataset):
            report = evaluate(frozen_eval_net(net), dataset, sim, enc)
            stats["train_accuracy"] = report.overall
        epoch_stats.append(stats)
        trail.log(stats)
        logger.info("phase 2 epoch %d/%d done (%d presentations)%s",
                    epoch + 1, sim.epochs_phase2, counter,
                    f" acc={stats.get('train_accuracy', float('nan')):.3f}"
                    if "train_accuracy" in stats else "")
    trail.finish(counter)
    return PhaseResult(net=net, checkpoints=trail.paths, epoch_stats=epoch_stats)


# -- classification and evaluation -------------------------------------------


def classify(net: NetworkTopology, img, sim: SimulationConfig,
             enc: EncodingConfig) -> ClassificationResult:
    """Winner-takes-all prediction; requires every projection frozen."""
    for pop in net.projections.values():
        if pop.mode != "static":
            raise ValueError(
                f"classification needs static projections, {pop.name} is {pop.mode}")
    record = present_image(net, img, sim, enc, plastic=False)
    counts = record.subset(net.readout_layer.start, net.readout_layer.stop).counts()
    class_counts = np.bincount(net.class_of, weights=counts.astype(np.float64),
                               minlength=net.config.n_classes)
    best = class_counts.max()
    winners = np.flatnonzero(class_counts == best)
    return ClassificationResult(predicted=int(winners[0]),
                                class_counts=class_counts,
                                neuron_counts=counts,
                                tie=winners.size > 1)


def evaluate(net: NetworkTopology, dataset: Dataset, sim: SimulationConfig,
             enc: EncodingConfig, workers: int = 1) -> EvaluationReport:
    """Accuracy over a dataset: overall, per class, and the class mean +- std.

    `workers` parallelizes the (read-only) per-image presentations; results
    are reduced in dataset order, so the report is identical for any count.
    """
    if len(dataset) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    if workers < 1:
        raise ValueError("workers must be >= 1")

    def one(i: int) -> tuple[int, bool]:
        res = classify(net, dataset[i], sim, enc)
        return res.predicted, res.tie

    if workers == 1:
        results = [one(i) for i in range(len(dataset))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(dataset))))

    labels = dataset.labels()
    predicted = np.array([p for p, _ in results], dtype=np.int64)
    ties = sum(1 for _, t in results if t)
    correct = predicted == labels
    class_ids = np.flatnonzero(np.bincount(labels, minlength=dataset.n_classes))
    per_class = np.array([correct[labels == c].mean() for c in class_ids])
    n_per_class = np.array([(labels == c).sum() for c in class_ids])
    return EvaluationReport(
        overall=float(correct.mean()),
        class_ids=class_ids,
        class_names=tuple(dataset.class_names[c] for c in class_ids),
        per_class=per_class,
        n_per_class=n_per_class,
        mean_class=float(per_class.mean()),
        std_class=float(per_class.std()),
        n_samples=len(dataset),
        ties=ties,
    )


# -- initial readout weight search -------------------------------------------


def monte_carlo_weight_search(net: NetworkTopology, candidates: tuple[float, float],
                              trials: int, eval_subset: Dataset,
                              sim: SimulationConfig, enc: EncodingConfig,
                              seed: int = 0) -> SearchResult:
    """Sample feat_readout initial weights, score each by a short phase-2 run.

    Each trial copies the phase-1-trained network, sets every feat_readout
    weight to the candidate, trains one phase-2 epoch on eval_subset, and
    scores accuracy on eval_subset with frozen weights. Ties pick the smaller
    weight. Deterministic for a given seed.
    """
    lo, hi = candidates
    if not (np.isfinite(lo) and np.isfinite(hi) and 0.0 <= lo <= hi):
        raise ValueError(f"bad candidate range ({lo}, {hi})")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if len(eval_subset) == 0:
        raise ValueError("eval_subset must not be empty")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(lo, hi, trials)
    sim_one = replace(sim, epochs_phase2=1)
    results: list[Trial] = []
    for i, w in enumerate(weights):
        candidate = net.copy()
        candidate.projections["feat_readout"].weight.fill(w)
        run_phase2(candidate, eval_subset, sim_one, enc, out_dir=None,
                   eval_each_epoch=False)
        report = evaluate(frozen_eval_net(candidate), eval_subset, sim, enc)
        results.append(Trial(weight=float(w), accuracy=report.overall))
        logger.info("weight search trial %d/%d: w=%.3f acc=%.4f",
                    i + 1, trials, w, report.overall)
    best_acc = max(t.accuracy for t in results)
    best_weight = min(t.weight for t in results if t.accuracy == best_acc)
    return SearchResult(best_weight=best_weight, trials=results)
