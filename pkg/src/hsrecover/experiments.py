"""Simulation campaigns and noise-rate characterization.

A campaign draws noise rates for every repetition, simulates the same
schedule at each grid time, and then fits one hypersurface per grid time
and recovery order.  Recovery is strictly pointwise in time.
"""
from __future__ import annotations

import enum
import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import hypersurface as hs
from .lindblad import (
    ChannelKind,
    ExperimentSchedule,
    Gate,
    NoiseChannel,
    Wait,
    build_liouvillian,
    execute,
    field_hamiltonian,
)
from .quantum import (
    HADAMARD,
    MAX_QUBITS,
    SIGMA_X,
    cnot,
    embed_single_qubit,
    excited_population,
    rx,
)

# Fits only use characterization points above this, to stay clear of log(noise).
FIT_FLOOR = 1e-3


class Experiment(str, enum.Enum):
    T1_RELAX = "t1_relax"
    RAMSEY_NO_FIELD = "ramsey_no_field"
    RAMSEY_FIELD = "ramsey_field"
    GHZ_RAMSEY = "ghz_ramsey"

    @property
    def sensing(self) -> bool:
        return self in (Experiment.RAMSEY_FIELD, Experiment.GHZ_RAMSEY)


class ValidationError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NoCrossing(ValueError):
    """The curve never drops below 1/e on the grid."""


@dataclass(frozen=True)
class UnphysicalRate:
    """Marker for a characterization that produced a negative rate."""

    value: float


# --------------------------------------------------------------------------
# configuration


def default_times(experiment: Experiment) -> tuple[float, ...]:
    if experiment.sensing:
        grid = np.linspace(0.0, 5.0, 501)
    else:
        grid = np.linspace(0.0, 80.0, 81)
    return tuple(float(t) for t in np.round(grid, 10))


def _check_range(name, value):
    if value is None:
        return None
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ValidationError(name, "must be a pair [min, max] in us") from None
    if not (0 < lo <= hi) or not math.isfinite(hi):
        raise ValidationError(name, f"need 0 < min <= max, got [{lo}, {hi}]")
    return (lo, hi)


@dataclass(frozen=True)
class CampaignConfig:
    """Everything needed to reproduce one campaign.

    Ranges are characteristic times in us; rates are drawn as 1/T.
    ``rate_sampling`` is ``"uniform_rate"`` (rates uniform on [1/Tmax, 1/Tmin])
    or ``"uniform_time"`` (times uniform on [Tmin, Tmax]).
    """

    experiment: Experiment
    repetitions: int
    recovery_orders: tuple[int, ...]
    seed: int
    n_qubits: int | None = None
    t1_range: tuple[float, float] | None = None
    t2_star_range: tuple[float, float] | None = None
    times: tuple[float, ...] | None = None
    field_microtesla: float = 0.0
    gyromagnetic_rad_per_us_per_microtesla: float | None = None
    rate_sampling: str = "uniform_rate"

    def __post_init__(self):
        try:
            exp = Experiment(self.experiment)
        except ValueError:
            choices = ", ".join(e.value for e in Experiment)
            raise ValidationError("experiment", f"must be one of {choices}") from None
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("experiment", exp)

        n = self.n_qubits
        if n is None:
            n = 3 if exp is Experiment.GHZ_RAMSEY else 1
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise ValidationError("n_qubits", "must be an integer")
        if exp is Experiment.GHZ_RAMSEY:
            if not 1 <= n <= MAX_QUBITS:
                raise ValidationError("n_qubits", f"must be in [1, {MAX_QUBITS}]")
        elif n != 1:
            raise ValidationError("n_qubits", f"{exp.value} is a single-qubit experiment")
        set_("n_qubits", int(n))

        set_("t1_range", _check_range("t1_range", self.t1_range))
        set_("t2_star_range", _check_range("t2_star_range", self.t2_star_range))
        if self.t1_range is None and self.t2_star_range is None:
            raise ValidationError("t1_range", "at least one of t1_range, t2_star_range is required")
        if exp is Experiment.T1_RELAX and self.t1_range is None:
            raise ValidationError("t1_range", "required for t1_relax")
        if exp is Experiment.GHZ_RAMSEY and self.t1_range is not None:
            raise ValidationError("t1_range", "ghz_ramsey ignores T1; leave it unset")
        if self.rate_sampling not in ("uniform_rate", "uniform_time"):
            raise ValidationError("rate_sampling", "must be uniform_rate or uniform_time")

        times = default_times(exp) if self.times is None else self.times
        try:
            times = tuple(float(t) for t in times)
        except (TypeError, ValueError):
            raise ValidationError("times", "must be a list of numbers") from None
        if not times:
            raise ValidationError("times", "must not be empty")
        if min(times) < 0 or not all(map(math.isfinite, times)):
            raise ValidationError("times", "must be finite and >= 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("times", "must be strictly increasing")
        set_("times", times)

        if not math.isfinite(self.field_microtesla) or self.field_microtesla < 0:
            raise ValidationError("field_microtesla", "must be >= 0")
        gyro = self.gyromagnetic_rad_per_us_per_microtesla
        if self.field_microtesla > 0 and gyro is None:
            raise ValidationError("gyromagnetic_rad_per_us_per_microtesla",
                                  "required when field_microtesla > 0 (no default)")
        if gyro is not None and not math.isfinite(gyro):
            raise ValidationError("gyromagnetic_rad_per_us_per_microtesla", "must be finite")

        orders = self.recovery_orders
        if isinstance(orders, (int, np.integer)):
            orders = (orders,)
        try:
            orders = tuple(int(o) for o in orders)
        except (TypeError, ValueError):
            raise ValidationError("recovery_orders", "must be a list of integers") from None
        if not orders or min(orders) < 0:
            raise ValidationError("recovery_orders", "must be a non-empty list of orders >= 0")
        if len(set(orders)) != len(orders):
            raise ValidationError("recovery_orders", "must not repeat")
        set_("recovery_orders", orders)

        if not isinstance(self.repetitions, (int, np.integer)) or self.repetitions < 1:
            raise ValidationError("repetitions", "must be a positive integer")
        need = hs.basis_size(self.rate_dimension, max(orders))
        if self.repetitions < need:
            raise ValidationError(
                "repetitions",
                f"order {max(orders)} over {self.rate_dimension} rates needs >= {need}, "
                f"got {self.repetitions} (underdetermined)")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ValidationError("seed", "must be an integer in [0, 2**64)")

    @property
    def rate_labels(self) -> list[str]:
        labels = []
        if self.t1_range is not None:
            labels += [f"gamma1_q{q}" for q in range(self.n_qubits)]
        if self.t2_star_range is not None:
            labels += [f"gamma2_q{q}" for q in range(self.n_qubits)]
        return labels

    @property
    def rate_dimension(self) -> int:
        return len(self.rate_labels)

    @property
    def omega(self) -> float:
        """Larmor angular frequency in rad/us."""
        if self.field_microtesla == 0:
            return 0.0
        return self.gyromagnetic_rad_per_us_per_microtesla * self.field_microtesla

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experiment"] = self.experiment.value
        for k in ("recovery_orders", "times", "t1_range", "t2_star_range"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d


# --------------------------------------------------------------------------
# rates


def repetition_rng(seed: int, repetition: int) -> np.random.Generator:
    """Independent counter-based stream per (seed, repetition)."""
    ss = np.random.SeedSequence(seed, spawn_key=(repetition,))
    return np.random.Generator(np.random.Philox(ss))


def sample_rates(t_range, count: int, rng: np.random.Generator,
                 mode: str = "uniform_rate") -> np.ndarray:
    """Draw ``count`` rates (1/us) for characteristic times in ``t_range`` (us)."""
    lo, hi = (float(v) for v in t_range)
    if not (0 < lo <= hi) or not math.isfinite(hi):
        raise ValueError(f"invalid time range [{lo}, {hi}]")
    if mode == "uniform_rate":
        return rng.uniform(1.0 / hi, 1.0 / lo, count)
    if mode == "uniform_time":
        return 1.0 / rng.uniform(lo, hi, count)
    raise ValueError(f"unknown sampling mode {mode!r}")


def draw_rates(config: CampaignConfig, repetition: int) -> np.ndarray:
    rng = repetition_rng(config.seed, repetition)
    parts = []
    for rng_range in (config.t1_range, config.t2_star_range):
        if rng_range is not None:
            parts.append(sample_rates(rng_range, config.n_qubits, rng, config.rate_sampling))
    return np.concatenate(parts)


def noise_channels(config: CampaignConfig, rates) -> list[NoiseChannel]:
    rates = list(rates)
    n = config.n_qubits
    channels = []
    if config.t1_range is not None:
        channels += [NoiseChannel(ChannelKind.AMPLITUDE_DAMPING, q, rates.pop(0)) for q in range(n)]
    if config.t2_star_range is not None:
        channels += [NoiseChannel(ChannelKind.PURE_DEPHASING, q, rates.pop(0)) for q in range(n)]
    return channels


# --------------------------------------------------------------------------
# schedules


def t1_schedule(wait_time: float) -> ExperimentSchedule:
    return ExperimentSchedule(1, (Gate(SIGMA_X, "X"), Wait(wait_time)), excited_population(1, 0))


def ramsey_schedule(wait_time: float) -> ExperimentSchedule:
    half = Gate(rx(np.pi / 2), "RX(pi/2)")
    return ExperimentSchedule(1, (half, Wait(wait_time), half), excited_population(1, 0))


def ghz_schedule(n_qubits: int, wait_time: float) -> ExperimentSchedule:
    """Prepare GHZ, wait, undo the entangler, read out qubit 0."""
    h = Gate(embed_single_qubit(HADAMARD, 0, n_qubits), "H(0)")
    chain = [Gate(cnot(q, q + 1, n_qubits), f"CNOT({q},{q + 1})") for q in range(n_qubits - 1)]
    steps = [h, *chain, Wait(wait_time), *reversed(chain), h]
    return ExperimentSchedule(n_qubits, tuple(steps), excited_population(n_qubits, 0))


def schedule_for(config: CampaignConfig, wait_time: float) -> ExperimentSchedule:
    exp = config.experiment
    if exp is Experiment.T1_RELAX:
        return t1_schedule(wait_time)
    if exp is Experiment.RAMSEY_NO_FIELD:
        return ramsey_schedule(wait_time)
    return ghz_schedule(config.n_qubits, wait_time)


@functools.lru_cache(maxsize=8)
def _grid_schedules(config: CampaignConfig) -> tuple[ExperimentSchedule, ...]:
    return tuple(schedule_for(config, t) for t in config.times)


def simulate_repetition(config: CampaignConfig, rates) -> np.ndarray:
    """Observable at every grid time for one set of noise rates."""
    h = field_hamiltonian(config.n_qubits, config.omega)
    liouv = build_liouvillian(h, noise_channels(config, rates), config.n_qubits)
    return np.array([execute(s, liouv) for s in _grid_schedules(config)])


def _simulate_many(config: CampaignConfig, rates_block: np.ndarray) -> np.ndarray:
    return np.array([simulate_repetition(config, r) for r in rates_block])


# --------------------------------------------------------------------------
# recovery


@dataclass
class CampaignResult:
    times: np.ndarray
    rates: np.ndarray  # repetitions x rate dimension
    curves: np.ndarray  # repetitions x times
    recovered: dict[int, np.ndarray]
    models: dict[int, list[hs.HypersurfaceModel]]
    rate_labels: list[str] = field(default_factory=list)
    config: CampaignConfig | None = None
    excluded: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def best(self) -> np.ndarray:
        return self.curves.max(axis=0)

    @property
    def worst(self) -> np.ndarray:
        return self.curves.min(axis=0)

    @property
    def average(self) -> np.ndarray:
        return self.curves.mean(axis=0)

    @property
    def orders(self) -> list[int]:
        return list(self.recovered)

    def models_by_time(self) -> dict[float, list[hs.HypersurfaceModel]]:
        return {float(t): [self.models[o][k] for o in self.orders]
                for k, t in enumerate(self.times)}


def recover(rates, times, curves, orders: Sequence[int], rate_labels=None) -> CampaignResult:
    """Fit every grid time independently at every requested order."""
    rates = np.asarray(rates, dtype=float)
    if rates.ndim == 1:
        rates = rates[:, None]
    curves = np.asarray(curves, dtype=float)
    times = np.asarray(times, dtype=float)
    if curves.shape != (rates.shape[0], times.size):
        raise ValueError(f"curves shape {curves.shape} does not match "
                         f"{rates.shape[0]} repetitions x {times.size} times")
    recovered, models, warnings = {}, {}, []
    for order in orders:
        fits = [hs.fit(rates, curves[:, k], order) for k in range(times.size)]
        models[order] = fits
        recovered[order] = np.array([m.extrapolate() for m in fits])
        bad = [float(t) for t, m in zip(times, fits) if m.degenerate]
        if bad:
            warnings.append(f"order {order}: rank-deficient design at {len(bad)} "
                            f"time(s), first at t={bad[0]:g} us")
    labels = list(rate_labels) if rate_labels else [f"rate_{i + 1}" for i in range(rates.shape[1])]
    return CampaignResult(times, rates, curves, recovered, models, labels, warnings=warnings)


def run_campaign(config: CampaignConfig, workers: int = 1) -> CampaignResult:
    """Simulate every repetition and recover at every grid time.

    Rates come from per-repetition RNG streams and the reduction runs in
    repetition order, so the result does not depend on ``workers``.
    """
    rates = np.array([draw_rates(config, j) for j in range(config.repetitions)])
    if workers <= 1:
        curves = _simulate_many(config, rates)
    else:
        blocks = np.array_split(rates, min(workers * 4, len(rates)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_many, [config] * len(blocks), blocks))
        curves = np.concatenate(parts)
    result = recover(rates, config.times, curves, config.recovery_orders, config.rate_labels)
    result.config = config
    return result


# --------------------------------------------------------------------------
# characterization


def effective_t1(times, curve) -> float:
    """First time the curve falls below 1/e, linearly interpolated."""
    times = np.asarray(times, dtype=float)
    curve = np.asarray(curve, dtype=float)
    level = math.exp(-1)
    if curve[0] < level:
        raise ValueError("curve starts below 1/e")
    below = np.nonzero(curve < level)[0]
    if below.size == 0:
        raise NoCrossing("curve never falls below 1/e on this grid")
    k = below[0]
    t0, t1, y0, y1 = times[k - 1], times[k], curve[k - 1], curve[k]
    return float(t0 + (y0 - level) * (t1 - t0) / (y0 - y1))


@dataclass(frozen=True)
class ExponentialFit:
    amplitude: float
    rate: float
    flagged: bool = False  # log-linear start was impossible
    iterations: int = 0


def fit_exponential(times, values, max_iter: int = 50, step_tol: float = 1e-10) -> ExponentialFit:
    """Least-squares ``a * exp(-r t)``: log-linear start, Gauss-Newton polish."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size != y.size or t.size < 3:
        raise ValueError("need at least 3 (time, value) pairs")
    flagged = bool(np.any(y <= 0))
    if not flagged:
        slope, intercept = np.polyfit(t, np.log(y), 1)
        a, r = math.exp(intercept), -slope
    else:
        a = float(y.max())
        pos = np.nonzero(y > 0)[0]
        if pos.size >= 2 and t[pos[-1]] > t[pos[0]]:
            r = math.log(y[pos[0]] / y[pos[-1]]) / (t[pos[-1]] - t[pos[0]])
        else:
            r = 0.0
    p = np.array([a, r])

    def sse(q):
        return float(np.sum((q[0] * np.exp(-q[1] * t) - y) ** 2))

    it = 0
    for it in range(1, max_iter + 1):
        e = np.exp(-p[1] * t)
        res = p[0] * e - y
        jac = np.column_stack([e, -p[0] * t * e])
        step = np.linalg.lstsq(jac, -res, rcond=None)[0]
        base, lam = sse(p), 1.0
        while lam > 1e-6 and sse(p + lam * step) > base:
            lam /= 2
        p = p + lam * step
        if np.max(np.abs(lam * step) / (1 + np.abs(p))) < step_tol:
            break
    return ExponentialFit(float(p[0]), float(p[1]), flagged, it)


def ramsey_envelope(populations) -> np.ndarray:
    """Coherence envelope 2*P1 - 1 of a field-free Ramsey curve."""
    return 2 * np.asarray(populations, dtype=float) - 1


def _windowed_rate(times, values) -> float:
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = y > FIT_FLOOR
    if keep.sum() >= 3:
        t, y = t[keep], y[keep]
    return fit_exponential(t, y).rate


def characterize_t1(times, populations) -> float:
    """T1 in us from a relaxation curve."""
    return 1.0 / _windowed_rate(times, populations)


def characterize_t2(times, ramsey_populations) -> float:
    """T2 in us from a field-free Ramsey curve."""
    return 1.0 / _windowed_rate(times, ramsey_envelope(ramsey_populations))


def pure_dephasing_from_t1_t2(t1: float, t2: float) -> float | UnphysicalRate:
    if not (t1 > 0 and t2 > 0):
        raise ValueError(f"T1 and T2 must be positive, got {t1}, {t2}")
    gamma2 = 1.0 / t2 - 1.0 / (2.0 * t1)
    return UnphysicalRate(gamma2) if gamma2 < 0 else gamma2


@dataclass(frozen=True)
class Characterization:
    """Measured T1 and Ramsey data for one repetition."""

    t1_times: Sequence[float]
    t1_populations: Sequence[float]
    ramsey_times: Sequence[float]
    ramsey_populations: Sequence[float]

    def rates(self) -> tuple[float, float | UnphysicalRate]:
        t1 = characterize_t1(self.t1_times, self.t1_populations)
        t2 = characterize_t2(self.ramsey_times, self.ramsey_populations)
        return 1.0 / t1, pure_dephasing_from_t1_t2(t1, t2)


def recover_characterized(characterizations: Sequence[Characterization], times, curves,
                          orders: Sequence[int]) -> CampaignResult:
    """Recover from externally characterized repetitions.

    Repetitions whose inferred pure-dephasing rate is negative are dropped
    before fitting; their indices are listed in ``result.excluded``.
    """
    curves = np.asarray(curves, dtype=float)
    if len(characterizations) != curves.shape[0]:
        raise ValueError("one characterization per repetition is required")
    kept, rates, excluded = [], [], []
    for j, ch in enumerate(characterizations):
        g1, g2 = ch.rates()
        if isinstance(g2, UnphysicalRate):
            excluded.append(j)
            continue
        kept.append(j)
        rates.append((g1, g2))
    result = recover(np.array(rates).reshape(-1, 2), times, curves[kept], orders,
                     ["gamma1", "gamma2"])
    result.excluded = excluded
    if excluded:
        result.warnings.append(f"excluded {len(excluded)} repetition(s) with negative gamma2")
    return result


def summary_effective_t1(result: CampaignResult) -> Mapping[int, float | None]:
    out = {}
    for order, curve in result.recovered.items():
        try:
            out[order] = effective_t1(result.times, curve)
        except (NoCrossing, ValueError):
            out[order] = None
    return out
