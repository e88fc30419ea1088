"""Experiment runner: configuration layering, execution and result emission.

An experiment reads its settings from the device namespaces
(``device``, ``receptor``, ``stdp``, ``xbar``) plus its own namespaces, runs,
and returns tables, scalar metrics and named invariant checks. The runner
writes one CSV per table, an optional gnuplot stub, and ``manifest.json``
holding everything needed to replay the run.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import io, protocols
from .config import Config, ConfigError, env_overrides, parse_kv
from .devices import SynapseParams
from .presets import DEFAULT_PRESET, DEVICE_SECTIONS, apply_preset, canonical_name, \
    preset_from_config
from .reservoir import ReservoirConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class DataError(RuntimeError):
    """Required input data is missing or unreadable."""


# --------------------------------------------------------------------------
# per-experiment settings
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DataSettings:
    mnist_dir: str = ""   # empty: $OECTSIM_MNIST_DIR


@dataclass(frozen=True)
class LtpSettings:
    simulate: bool = True   # add one noisy simulated ramp per direction


@dataclass(frozen=True)
class RetentionSettings:
    n_states: int = 8
    t_end: float = 20000.0
    n_times: int = 41


@dataclass(frozen=True)
class StdpSweepSettings:
    dt_max: float = 0.2
    dt_step: float = 0.02
    pre_amplitude: float = -0.8
    pre_width: float = 0.1
    post_amplitude: float = -2.0
    post_width: float = 0.002
    start_fraction: float = 0.3


@dataclass(frozen=True)
class AnnSettings:
    epochs: int = 3
    batch: int = 100
    learn_rate: float = 0.2
    lr_decay: float = 0.0
    weight_range: float = 1.0
    n_train: int = 0   # 0: all
    n_test: int = 0


@dataclass(frozen=True)
class SnnSettings:
    epochs: int = 8
    learn_rate: float = 0.5
    lr_decay: float = 1.0
    teacher_margin: float = 0.1
    weight_range: float = 1.0
    n_train: int = 1000
    n_test: int = 500


@dataclass(frozen=True)
class ReflexSettings:
    bell: float = 0.4
    food: float = -0.8
    vdd: float = -0.8
    dt: float = 0.01
    pairing_duration: float = 0.1
    rest: float = 0.5
    bell_steps: int = 100
    pairings: int = 100
    sweep_pairings: int = 20
    activity_min: float = 1e-3
    activity_max: float = 1.0
    n_activities: int = 7
    activity: float = 0.1


@dataclass(frozen=True)
class EcgSettings:
    n_train_per_class: int = 40
    n_test_per_class: int = 20
    epochs: int = 700
    learn_rate: float = 0.2
    batch: int = 20
    weight_range: float = 4.0
    stop_at_perfect: bool = True


@dataclass(frozen=True)
class CharacterizeSettings:
    snr_ramps: int = 50
    snr_pulses: int = 50
    c2c_cycles: int = 50
    c2c_pulses: int = 20


# --------------------------------------------------------------------------
# spec and result types
# --------------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    name: str
    preset: str = DEFAULT_PRESET
    seed: int = 0
    output_dir: Path | str = "results"
    overrides: dict[str, str] = field(default_factory=dict)
    plot: bool = False

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}; "
                              f"choose from {', '.join(EXPERIMENTS)}")
        self.seed = int(self.seed)
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        self.output_dir = Path(self.output_dir)


@dataclass
class Table:
    name: str
    columns: dict[str, object]
    x: str | None = None          # for the gnuplot stub
    plot: tuple[str, ...] = ()
    logx: bool = False


@dataclass
class Outcome:
    tables: list[Table] = field(default_factory=list)
    metrics: dict[str, object] = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)


@dataclass
class RunResult:
    status: int
    files: list[Path]
    outcome: Outcome
    manifest: dict
    config: Config

    @property
    def failed_checks(self) -> list[str]:
        return [k for k, ok in self.outcome.checks.items() if not ok]


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def _run_ltp(cfg: Config, rng) -> Outcome:
    sp: SynapseParams = cfg.section("device")
    s: LtpSettings = cfg.section("ltp")
    up = protocols.ltp_ramp(sp, "potentiate")
    down = protocols.ltp_ramp(sp, "depress")
    n = sp.n_pulses
    cols = {"pulse": np.arange(n + 1), "g_potentiate": up, "g_depress": down}
    if s.simulate:
        cols["g_potentiate_sim"] = protocols.simulated_ramp(sp, rng, "potentiate")[0]
        cols["g_depress_sim"] = protocols.simulated_ramp(sp, rng, "depress")[0]
    distinct = len(np.unique(up))
    return Outcome(
        tables=[Table("ltp_curve", cols, "pulse", tuple(c for c in cols if c != "pulse"))],
        metrics={"n_states": sp.n_states, "distinct_states": distinct,
                 "g_min": float(up[0]), "g_max": float(up[-1])},
        checks={"potentiation_monotone": bool(np.all(np.diff(up) > 0)),
                "depression_monotone": bool(np.all(np.diff(down) < 0)),
                "distinct_states": distinct == sp.n_states},
    )


def _run_retention(cfg: Config, rng) -> Outcome:
    s: RetentionSettings = cfg.section("retention")
    r = protocols.retention(cfg.section("device"), cfg.section("xbar"), rng,
                            s.n_states, s.t_end, s.n_times)
    cols = {"time": r.times}
    cols.update({f"g{j}": r.g[:, j] for j in range(r.g.shape[1])})
    return Outcome(
        tables=[Table("retention", cols, "time", tuple(cols)[1:], logx=True)],
        metrics={"min_gap_over_read_sigma": r.min_gap_sigma,
                 "final_over_initial": (r.g[-1] / r.g[0]).tolist()},
        checks={"states_ordered": r.ordered, "finite": bool(np.isfinite(r.g).all())},
    )


def _run_stdp_sweep(cfg: Config, rng) -> Outcome:
    s: StdpSweepSettings = cfg.section("stdp_sweep")
    dts = np.arange(0.0, s.dt_max + 0.5 * s.dt_step, s.dt_step)
    r = protocols.stdp_sweep(cfg.section("device"), cfg.section("receptor"), cfg.section("xbar"),
                             rng, dts, s.pre_amplitude, s.pre_width, s.post_amplitude,
                             s.post_width, s.start_fraction)
    fit = r.amplitude * np.exp(-r.delta_t / r.tau)
    xb = cfg.section("xbar")
    return Outcome(
        tables=[Table("stdp_sweep", {"delta_t": r.delta_t, "delta_g": r.delta_g, "fit": fit},
                      "delta_t", ("delta_g", "fit"))],
        metrics={"tau_fit": r.tau, "amplitude_fit": r.amplitude, "r2": r.r2,
                 "tau_configured": xb.t_tau_off, "max_fit_deviation": r.max_deviation},
        checks={"finite": bool(np.isfinite(r.delta_g).all()),
                "potentiating": bool(np.all(r.delta_g >= 0))},
    )


def _load_mnist(cfg: Config):
    from .mnist import IdxError, load_mnist
    path = cfg["data.mnist_dir"] or None
    try:
        return load_mnist(path)
    except (FileNotFoundError, IdxError, NotADirectoryError) as exc:
        raise DataError(f"MNIST: {exc}") from exc


def _mnist_outcome(result, tag: str, extra: Mapping) -> Outcome:
    from .learning import TrainResult
    assert isinstance(result, TrainResult)
    hist = result.history
    curve = {"epoch": [h.epoch for h in hist], "loss": [h.loss for h in hist],
             "train_acc": [h.train_acc for h in hist], "test_acc": [h.test_acc for h in hist]}
    conf = result.confusion
    conf_cols = {"true": np.arange(conf.shape[0])}
    conf_cols.update({f"pred{j}": conf[:, j] for j in range(conf.shape[1])})
    return Outcome(
        tables=[Table(f"{tag}_curve", curve, "epoch", ("train_acc", "test_acc")),
                Table(f"{tag}_confusion", conf_cols)],
        metrics={"final_accuracy": result.final_accuracy, **extra},
        checks={"accuracy_finite": bool(np.isfinite(result.final_accuracy)),
                "confusion_total": int(conf.sum()) == int(extra["n_test"])},
    )


def _run_mnist(cfg: Config, rng, mode: str) -> Outcome:
    from .learning import TrainConfig, build_network, train
    train_set, test_set = _load_mnist(cfg)
    s = cfg.section(mode)
    if s.n_train:
        train_set = train_set.subset(s.n_train)
    if s.n_test:
        test_set = test_set.subset(s.n_test)
    preset = preset_from_config(cfg, cfg.meta_preset)
    net = build_network(784, 10, preset, rng, weight_range=s.weight_range)
    tc = TrainConfig(mode=mode, epochs=s.epochs, batch=getattr(s, "batch", 1),
                     learn_rate=s.learn_rate, lr_decay=s.lr_decay,
                     teacher_margin=getattr(s, "teacher_margin", 0.1),
                     device_preset=preset.name)
    result = train(net, train_set.images, train_set.labels, test_set.images, test_set.labels,
                   tc, rng)
    return _mnist_outcome(result, f"mnist_{mode}",
                          {"n_train": len(train_set), "n_test": len(test_set)})


def _run_reflex(cfg: Config, rng) -> Outcome:
    s: ReflexSettings = cfg.section("reflex")
    proto = protocols.ReflexProtocol(**asdict(s))
    sp = cfg.section("device")
    r = protocols.reflex_experiment(sp, cfg.section("receptor"), cfg.section("xbar"), rng, proto)
    steps = np.diff(r.pairing_trace)
    return Outcome(
        tables=[Table("reflex_pairing", {"pairing": np.arange(1, len(r.pairing_trace) + 1),
                                         "memory": r.pairing_trace}, "pairing", ("memory",)),
                Table("reflex_activity", {"activity": r.activities, "memory": r.memory},
                      "activity", ("memory",), logx=True)],
        metrics={"bell_only_change_gaps": r.bell_only_change / sp.state_gap,
                 "slope_per_decade": r.slope, "intercept": r.intercept, "r2": r.r2,
                 "final_memory": float(r.pairing_trace[-1]),
                 "converged": r.converged(sp.state_gap)},
        checks={"memory_in_range": bool(np.all((r.pairing_trace >= sp.g_min * 0.999)
                                               & (r.pairing_trace <= sp.g_max * 1.001))),
                "pairing_non_decreasing": bool(np.all(steps >= -4 * sp.state_gap))},
    )


def _run_ecg(cfg: Config, rng) -> Outcome:
    from .ecg import N_CLASSES, synthetic_dataset
    from .reservoir import build_readout, readout_confusion, train_readout, transform_many
    s: EcgSettings = cfg.section("ecg")
    rc: ReservoirConfig = cfg.section("reservoir")
    params = cfg.section("receptor")
    seed = cfg.meta_seed
    train_recs = synthetic_dataset(s.n_train_per_class, seed=1000 * seed + 1)
    test_recs = synthetic_dataset(s.n_test_per_class, seed=1000 * seed + 2)
    ftr = transform_many(train_recs, rc, params)
    fte = transform_many(test_recs, rc, params)
    ytr = np.array([r.label for r in train_recs])
    yte = np.array([r.label for r in test_recs])
    preset = preset_from_config(cfg, cfg.meta_preset)
    readout = build_readout(preset, rng, rc, weight_range=s.weight_range)
    train_readout(readout, ftr, ytr, s.epochs, rng, fte, yte, learn_rate=s.learn_rate,
                  batch=s.batch, stop_at_perfect=s.stop_at_perfect,
                  shuffle_rng=np.random.default_rng(100 + seed))
    acc, conf = readout_confusion(readout, fte, yte, rng)
    conf_cols = {"true": np.arange(N_CLASSES)}
    conf_cols.update({f"pred{j}": conf[:, j] for j in range(N_CLASSES)})
    diag_dominant = all(conf[i, i] > conf[i].sum() - conf[i, i] for i in range(N_CLASSES))
    return Outcome(
        tables=[Table("ecg_curve", {"epoch": np.arange(1, len(readout.curve) + 1),
                                    "test_acc": readout.curve}, "epoch", ("test_acc",)),
                Table("ecg_confusion", conf_cols)],
        metrics={"final_accuracy": acc, "epochs_run": len(readout.curve),
                 "first_perfect_epoch": readout.first_perfect_epoch,
                 "n_features": int(ftr.shape[1]), "n_train": len(ytr), "n_test": len(yte),
                 "diagonal_dominant": diag_dominant},
        checks={"features_finite": bool(np.isfinite(ftr).all() and np.isfinite(fte).all()),
                "feature_dim": ftr.shape[1] == rc.n_features},
    )


def _run_characterize(cfg: Config, rng) -> Outcome:
    s: CharacterizeSettings = cfg.section("characterize")
    sp = cfg.section("device")
    rp = cfg.section("receptor")
    snr = protocols.measure_write_snr(sp, rng, s.snr_ramps, s.snr_pulses)
    c2c = protocols.measure_c2c(sp, rng, s.c2c_cycles, s.c2c_pulses).c2c
    rec = protocols.receptor_figures(rp)
    configured = {"write_snr": sp.snr_write, "c2c": sp.c2c_cv, "ss": rp.ss,
                  "on_off_ratio": rp.on_off_ratio,
                  "g_m_norm": rp.g_m_norm, "tau_on": rp.tau_on, "tau_off": rp.tau_off,
                  "nr_ion": rp.nr_ion, "nr_temp": rp.nr_temp}
    measured = {"write_snr": snr, "c2c": c2c, **rec}
    names = list(configured)
    return Outcome(
        tables=[Table("characterize", {"quantity": names,
                                       "configured": [float(configured[k]) for k in names],
                                       "measured": [float(measured[k]) for k in names]})],
        metrics={f"measured_{k}": float(v) for k, v in measured.items()},
        checks={"measured_finite": all(np.isfinite(v) for k, v in measured.items()
                                       if np.isfinite(configured[k]))},
    )


@dataclass(frozen=True)
class Experiment:
    run: Callable[[Config, np.random.Generator], Outcome]
    sections: Mapping[str, type]
    description: str


EXPERIMENTS: dict[str, Experiment] = {
    "ltp-curve": Experiment(_run_ltp, {"ltp": LtpSettings},
                            "ideal and simulated potentiation/depression ramps"),
    "retention": Experiment(_run_retention, {"retention": RetentionSettings},
                            "drift of programmed analog states"),
    "stdp-sweep": Experiment(_run_stdp_sweep, {"stdp_sweep": StdpSweepSettings},
                             "1T1R weight change versus spike delay"),
    "mnist-ann": Experiment(lambda c, r: _run_mnist(c, r, "ann"),
                            {"ann": AnnSettings, "data": DataSettings},
                            "device-in-the-loop softmax on MNIST"),
    "mnist-snn": Experiment(lambda c, r: _run_mnist(c, r, "snn"),
                            {"snn": SnnSettings, "data": DataSettings},
                            "supervised STDP on an MNIST subset"),
    "reflex": Experiment(_run_reflex, {"reflex": ReflexSettings},
                         "conditioned reflex with an ion-sensing receptor"),
    "ecg-rc": Experiment(_run_ecg, {"ecg": EcgSettings, "reservoir": ReservoirConfig},
                         "receptor reservoir on synthetic 12-lead ECG"),
    "characterize": Experiment(_run_characterize, {"characterize": CharacterizeSettings},
                               "recover device statistics from simulated measurements"),
}


# --------------------------------------------------------------------------
# runner
# --------------------------------------------------------------------------

def resolve_config(spec: ExperimentSpec, environ: Mapping[str, str] | None = None) -> Config:
    """defaults < preset < environment < explicit overrides; unknown keys raise."""
    sections = {**DEVICE_SECTIONS, **EXPERIMENTS[spec.name].sections}
    cfg = apply_preset(Config(sections), spec.preset)
    cfg.update_raw(env_overrides(environ), source="environment")
    cfg.update_raw(dict(spec.overrides), source="--set")
    for ns in cfg.sections:  # validate every section once up front
        cfg.section(ns)
    cfg.meta_preset = canonical_name(spec.preset)
    cfg.meta_seed = spec.seed
    return cfg


def _write_outputs(outdir: Path, outcome: Outcome, plot: bool) -> list[Path]:
    files = []
    for t in outcome.tables:
        path = io.write_columns(outdir / f"{t.name}.csv", t.columns)
        files.append(path)
        if plot and t.x is not None and t.plot:
            files.append(io.write_gnuplot(outdir / f"{t.name}.gp", path.name, t.x, t.plot,
                                          list(t.columns), title=t.name, logx=t.logx))
    return files


def run_experiment(spec: ExperimentSpec, environ: Mapping[str, str] | None = None) -> RunResult:
    """Run one experiment and write its artifacts to ``spec.output_dir``.

    Raises :class:`ConfigError` for bad configuration and :class:`DataError`
    for missing inputs. Failed invariant checks are reported through
    ``status`` (``EXIT_INVARIANT``) rather than raised.
    """
    cfg = resolve_config(spec, environ)
    rng = np.random.default_rng(spec.seed)
    t0 = time.perf_counter()
    outcome = EXPERIMENTS[spec.name].run(cfg, rng)
    wall = time.perf_counter() - t0
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    files = _write_outputs(spec.output_dir, outcome, spec.plot)
    status = EXIT_OK if all(outcome.checks.values()) else EXIT_INVARIANT
    manifest = {
        "experiment": spec.name,
        "preset": cfg.meta_preset,
        "seed": spec.seed,
        "config": cfg.to_strings(),
        "overrides": dict(spec.overrides),
        "versions": io.versions(),
        "wall_time_s": wall,
        "metrics": outcome.metrics,
        "checks": outcome.checks,
        "status": status,
        "files": {p.name: io.sha256(p) for p in files},
    }
    io.write_manifest(spec.output_dir / "manifest.json", manifest)
    return RunResult(status, files, outcome, manifest, cfg)


def spec_from_manifest(path, output_dir=None, plot: bool = False) -> ExperimentSpec:
    """Rebuild the spec of a previous run; the resolved config becomes the overrides."""
    m = io.read_manifest(path)
    try:
        name, preset, seed, config = m["experiment"], m["preset"], m["seed"], m["config"]
    except KeyError as exc:
        raise ConfigError(f"manifest {path} lacks {exc}") from None
    out = Path(path).parent / "replay" if output_dir is None else output_dir
    return ExperimentSpec(name, preset, seed, out, dict(config), plot)


def replay(path, output_dir=None, plot: bool = False) -> RunResult:
    """Re-run from a manifest alone, ignoring the environment."""
    return run_experiment(spec_from_manifest(path, output_dir, plot), environ={})


def read_overrides_file(path) -> dict[str, str]:
    p = Path(path)
    return parse_kv(p.read_text(), source=str(p))
