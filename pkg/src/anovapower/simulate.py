"""Monte Carlo engine: balanced data, ANOVA decomposition, empirical power.

Data follow the restricted mixed model used for the expected mean squares in
:mod:`anovapower.structure`. Each random term gets iid normal effects over
its level combinations, centered over its fixed live factors, so a term's
variance component is exactly the coefficient-one quantity in the EMS table.
Fixed terms other than the ``A`` term are zero.

Replication ``i`` draws from its own generator
``default_rng(SeedSequence(seed, spawn_key=(i,)))``, so any subset of
replications can be regenerated independently and serial and threaded runs
give identical counts.

For the two models without an exact F-test the quasi-F ratio is::

    F' = (MS_A + MS_ABC) / (MS_AB + MS_AC)

for both ``A x B~ x C~`` and ``(A > B~) x C~`` (in the nested model ``AB`` is
``B(A)`` and ``ABC`` is ``BC(A)``). Both sides have equal expectation under
H0, and each side's df is Satterthwaite's ``(sum MS)**2 / sum(MS**2 / df)``.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .bounds import WorstCaseInput, extremal_effects, guaranteed_power
from .catalog import (
    DesignPoint,
    TestPlan,
    VarianceSpec,
    check_components,
    effect_array,
    lookup,
    plan_for,
    resolve_model,
    restrict_variance,
)
from .distributions import central_f_cdf, central_f_quantile
from .errors import AnovaPowerError, DomainError, UnsupportedModelError
from .formula import ModelSpec
from .structure import ERROR, Structure

DEFAULT_REPLICATIONS = 10_000
BLOCK = 500
THREADS_ENV = "ANOVAPOWER_THREADS"
SATTERTHWAITE_NUMERATOR = ("A", "ABC")
SATTERTHWAITE_DENOMINATOR = ("AB", "AC")


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            raise AnovaPowerError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo experiment."""

    model: ModelSpec
    design: DesignPoint
    effects: np.ndarray
    variance: VarianceSpec
    alpha: float = 0.05
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0

    def __post_init__(self):
        model = resolve_model(self.model)
        object.__setattr__(self, "model", model)
        if self.design.mode != "integer":
            raise AnovaPowerError("simulation needs an integer design")
        missing = [p for p in model.params if p != "n" and p not in self.design.levels]
        if missing:
            raise AnovaPowerError(f"design is missing level counts {', '.join(missing)}")
        variance = VarianceSpec.of(self.variance)
        plan = lookup(model)
        check_components(plan, variance)
        object.__setattr__(self, "variance", variance)
        object.__setattr__(self, "effects", effect_array(plan, self.design, self.effects))
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise AnovaPowerError(f"replications must be a positive integer, got {self.replications!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise AnovaPowerError("seed must be an unsigned 64-bit integer")

    @classmethod
    def extremal(cls, model, design: DesignPoint, delta: float, variance, **kwargs) -> "SimConfig":
        """Config with the least favorable ``A`` effects for range ``delta``."""
        plan = lookup(model)
        return cls(plan.model, design, extremal_effects(plan, design, delta), variance, **kwargs)

    @property
    def structure(self) -> Structure:
        return Structure(self.model)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(self.design.get(f.lower())) for f in self.model.factors) + (int(self.design.n),)


# -- data generation -------------------------------------------------------------


class _Generator:
    """Precomputed broadcasting layout for one config."""

    def __init__(self, config: SimConfig):
        self.config = config
        model = config.model
        structure = config.structure
        self.shape = config.shape
        axes = {f: k for k, f in enumerate(model.factors)}
        self.terms = []
        for term in structure.terms:
            if not term.random:
                continue
            sd = math.sqrt(config.variance.components.get(term.name, 0.0))
            kept = sorted(axes[f] for f in term.factors)
            draw_shape = tuple(self.shape[k] for k in kept)
            view = tuple(self.shape[k] if k in kept else 1 for k in range(len(self.shape)))
            center = tuple(kept.index(axes[f]) for f in term.live if not model.is_random(f))
            self.terms.append((sd, draw_shape, view, center))
        self.error_sd = math.sqrt(config.variance.components.get(ERROR, 0.0))
        plan = lookup(model)
        fixed_view = tuple(self.shape[k] if f in plan.effect_factors else 1 for k, f in enumerate(model.factors)) + (1,)
        self.fixed = config.effects.reshape(fixed_view)

    def one(self, index: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(int(self.config.seed), spawn_key=(int(index),)))
        y = np.broadcast_to(self.fixed, self.shape).copy()
        for sd, draw_shape, view, center in self.terms:
            z = rng.standard_normal(draw_shape)
            for axis in center:
                z -= z.mean(axis=axis, keepdims=True)
            y += sd * z.reshape(view)
        y += self.error_sd * rng.standard_normal(self.shape)
        return y

    def block(self, start: int, stop: int) -> np.ndarray:
        return np.stack([self.one(i) for i in range(start, stop)])


def generate_dataset(config: SimConfig, stream_index: int) -> np.ndarray:
    """Replication ``stream_index`` of ``config``, shaped by the model's factors then ``n``."""
    return _Generator(config).one(stream_index)


def generate_datasets(config: SimConfig, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Replications ``start..stop-1`` stacked along a leading axis."""
    stop = config.replications if stop is None else stop
    return _Generator(config).block(start, stop)


def write_dataset(config: SimConfig, data: np.ndarray, fh: TextIO) -> None:
    """Dump one dataset as CSV, one observation per line with its full index tuple (1-based)."""
    names = [f.lower() for f in config.model.factors] + ["r", "y"]
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(names)
    for idx in np.ndindex(*data.shape):
        writer.writerow([i + 1 for i in idx] + [repr(float(data[idx]))])


# -- ANOVA -------------------------------------------------------------------------


@dataclass
class MeanSquares:
    """Per-stratum sums of squares and dfs, batched over a leading replication axis."""

    ss: dict[str, np.ndarray]
    df: dict[str, float]

    @property
    def ms(self) -> dict[str, np.ndarray]:
        return {k: self.ss[k] / self.df[k] for k in self.ss}

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.ss)


def anova_decompose(model: "ModelSpec | str", design: DesignPoint, data: np.ndarray) -> MeanSquares:
    """Balanced-design sums of squares for every stratum of ``model``.

    ``data`` has the shape of one dataset, or a stack of datasets along an
    extra leading axis (then every SS is an array over replications).
    """
    model = resolve_model(model)
    structure = Structure(model)
    shape = tuple(int(design.get(f.lower())) for f in model.factors) + (int(design.n),)
    data = np.asarray(data, dtype=float)
    single = data.shape == shape
    if single:
        data = data[None]
    if data.shape[1:] != shape:
        raise AnovaPowerError(f"data shape {data.shape[-len(shape) :]} does not match design shape {shape}")
    lead = 1
    axes = {f: k + lead for k, f in enumerate(model.factors)}
    total = math.prod(shape)
    means: dict[frozenset, np.ndarray] = {}

    def margin(kept: frozenset) -> np.ndarray:
        if kept not in means:
            drop = tuple(k for k in range(lead, data.ndim) if k not in {axes[f] for f in kept})
            means[kept] = data.mean(axis=drop, keepdims=True)
        return means[kept]

    values = design.values()
    ss: dict[str, np.ndarray] = {}
    df: dict[str, float] = {}
    for term in structure.terms:
        live = sorted(term.live)
        contrast = 0.0
        for mask in range(2 ** len(live)):
            subset = frozenset(f for k, f in enumerate(live) if mask >> k & 1)
            sign = -1.0 if (len(live) - len(subset)) % 2 else 1.0
            contrast = contrast + sign * margin(subset | term.bracket)
        weight = total / math.prod(shape[axes[f] - lead] for f in term.factors)
        ss[term.name] = weight * np.sum(contrast**2, axis=tuple(range(lead, data.ndim)))
        df[term.name] = term.df().evaluate(values)
    resid = data - margin(frozenset(model.factors))
    ss[ERROR] = np.sum(resid**2, axis=tuple(range(lead, data.ndim)))
    df[ERROR] = structure.error_df().evaluate(values)
    if single:
        ss = {k: v[0] for k, v in ss.items()}
    return MeanSquares(ss, df)


# -- tests -------------------------------------------------------------------------


@dataclass
class SimResult:
    rate: float
    ci_halfwidth: float
    rejections: int
    replications: int
    method: str
    df1: float
    df2: float | None
    denominator: str | None
    seed: int
    analytic_power: float | None = None
    mean_df2: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def wald_halfwidth(rate: float, replications: int, z: float = 1.959963984540054) -> float:
    return z * math.sqrt(max(rate * (1.0 - rate), 0.0) / replications)


def satterthwaite_df(ms: Sequence[np.ndarray], df: Sequence[float]) -> np.ndarray:
    total = sum(ms)
    return total**2 / sum(m**2 / d for m, d in zip(ms, df))


def satterthwaite_test(model: "ModelSpec | str", mean_squares: MeanSquares, alpha: float):
    """Quasi-F test of ``A`` for the two models without an exact F-test.

    Returns ``(reject, df1, df2)``, arrays over replications (or scalars for a
    single dataset).
    """
    plan = lookup(model)
    if plan.exact:
        raise UnsupportedModelError(f"{plan.formula} has an exact F-test; the quasi-F test is for approximate models")
    ms = mean_squares.ms
    num_ms = [ms[k] for k in SATTERTHWAITE_NUMERATOR]
    den_ms = [ms[k] for k in SATTERTHWAITE_DENOMINATOR]
    num = sum(num_ms)
    den = sum(den_ms)
    tiny = np.finfo(float).tiny
    if np.any(num <= tiny) or np.any(den <= tiny):
        raise DomainError("a combined mean square of the quasi-F ratio is not positive")
    df1 = satterthwaite_df(num_ms, [mean_squares.df[k] for k in SATTERTHWAITE_NUMERATOR])
    df2 = satterthwaite_df(den_ms, [mean_squares.df[k] for k in SATTERTHWAITE_DENOMINATOR])
    ratio = num / den
    flat = [central_f_cdf(float(f), float(d1), float(d2)) for f, d1, d2 in np.broadcast(ratio, df1, df2)]
    reject = np.reshape(np.array(flat) > 1.0 - alpha, np.shape(ratio))
    return reject, df1, df2


def _blocks(replications: int) -> list[tuple[int, int]]:
    return [(s, min(s + BLOCK, replications)) for s in range(0, replications, BLOCK)]


def _count(config: SimConfig, counter, threads: int | None) -> list:
    gen = _Generator(config)

    def run(bounds):
        start, stop = bounds
        data = gen.block(start, stop)
        return counter(anova_decompose(config.model, config.design, data))

    blocks = _blocks(config.replications)
    threads = default_threads() if threads is None else max(1, threads)
    if threads == 1 or len(blocks) == 1:
        return [run(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, blocks))


def _ratio_test(config: SimConfig, denominator: str, method: str, threads: int | None) -> SimResult:
    structure = config.structure
    values = config.design.values()
    a = structure.a_term.name
    df1 = structure.df(a).evaluate(values)
    df2 = structure.df(denominator).evaluate(values)
    critical = central_f_quantile(1.0 - config.alpha, df1, df2)

    def counter(ms: MeanSquares) -> int:
        m = ms.ms
        return int(np.count_nonzero(m[a] / m[denominator] > critical))

    hits = sum(_count(config, counter, threads))
    rate = hits / config.replications
    return SimResult(
        rate,
        wald_halfwidth(rate, config.replications),
        hits,
        config.replications,
        method,
        df1,
        df2,
        denominator,
        int(config.seed),
    )


def empirical_power_exact(config: SimConfig, threads: int | None = None) -> SimResult:
    """Rejection rate of the exact F-test ``MS_A / MS_denominator``."""
    plan = lookup(config.model)
    if not plan.exact:
        raise UnsupportedModelError(f"{plan.formula} has no exact F-test; use empirical_power")
    res = _ratio_test(config, config.structure.denominator(), "exact", threads)
    res.analytic_power = _analytic(plan, config)
    return res


def _analytic(plan: TestPlan, config: SimConfig) -> float | None:
    from .bounds import exact_power

    try:
        return exact_power(plan, config.design, config.effects, config.variance, config.alpha).power
    except AnovaPowerError:
        return None


def empirical_power(config: SimConfig, method: str = "auto", threads: int | None = None) -> SimResult:
    """Rejection rate for any catalog model.

    Args:
        method: ``"exact"`` for exact models; for the approximate models
            ``"satterthwaite"`` (the quasi-F test) or ``"equivalent"``, which
            applies the exact test of the equivalent model and so needs a
            vanishing interaction component. ``"auto"`` picks ``"exact"`` or
            ``"satterthwaite"``.
    """
    plan = lookup(config.model)
    if method == "auto":
        method = "exact" if plan.exact else "satterthwaite"
    if method == "exact":
        return empirical_power_exact(config, threads)
    if plan.exact:
        raise UnsupportedModelError(f"method {method!r} is for approximate models; {plan.formula} is exact")
    if method == "equivalent":
        zero = config.variance.zeros()
        den = config.structure.denominator(zero)
        if den is None:
            raise UnsupportedModelError(
                f"{plan.formula} reduces to an exact test only if an interaction component is zero"
            )
        res = _ratio_test(config, den, "equivalent", threads)
        eq = plan_for(config.model, config.variance)
        res.analytic_power = _analytic(eq, _as_exact(config, eq))
        return res
    if method != "satterthwaite":
        raise AnovaPowerError(f"unknown method {method!r}")

    def counter(ms: MeanSquares):
        reject, _, df2 = satterthwaite_test(config.model, ms, config.alpha)
        return int(np.count_nonzero(reject)), float(np.sum(df2))

    parts = _count(config, counter, threads)
    hits = sum(p[0] for p in parts)
    rate = hits / config.replications
    return SimResult(
        rate,
        wald_halfwidth(rate, config.replications),
        hits,
        config.replications,
        "satterthwaite",
        plan.df1.evaluate(config.design.values()),
        None,
        None,
        int(config.seed),
        mean_df2=sum(p[1] for p in parts) / config.replications,
    )


def _as_exact(config: SimConfig, plan: TestPlan) -> SimConfig:
    variance = restrict_variance(plan, config.variance)
    return SimConfig(plan.model, config.design, config.effects, variance, config.alpha, 1, config.seed)


# -- surfaces ----------------------------------------------------------------------


@dataclass
class SurfaceRow:
    b: int
    c: int
    power: float
    size_product: int
    ci_halfwidth: float | None = None


SURFACE_HEADER = ("b", "c", "power", "size_product")


def power_surface(
    model: "ModelSpec | str",
    b_values: Iterable[int],
    c_values: Iterable[int],
    n: int,
    alpha: float,
    delta: float,
    variance,
    levels: Mapping[str, int],
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = 0,
    threads: int | None = None,
) -> list[SurfaceRow]:
    """Guaranteed power over a ``(b, c)`` grid at fixed ``n``.

    Exact models, and approximate ones whose variance has a vanishing
    interaction, are evaluated analytically at the least favorable effects.
    Other approximate models use the quasi-F simulation with extremal
    effects and ``replications`` runs per grid point.
    """
    model = resolve_model(model)
    variance = VarianceSpec.of(variance)
    plan = lookup(model)
    analytic = None
    if plan.exact or plan_exists(model, variance):
        analytic = plan_for(model, variance)
        wc = WorstCaseInput(delta, restrict_variance(analytic, variance))
    rows = []
    for b in b_values:
        for c in c_values:
            design = DesignPoint({**levels, "b": b, "c": c}, n)
            if analytic is not None:
                res = guaranteed_power(analytic, design, wc, alpha)
                rows.append(SurfaceRow(b, c, res.power, b * c))
            else:
                cfg = SimConfig.extremal(
                    model, design, delta, variance, alpha=alpha, replications=replications, seed=seed
                )
                res = empirical_power(cfg, threads=threads)
                rows.append(SurfaceRow(b, c, res.rate, b * c, res.ci_halfwidth))
    return rows


def plan_exists(model: ModelSpec, variance: VarianceSpec) -> bool:
    try:
        plan_for(model, variance)
    except UnsupportedModelError:
        return False
    return True


def write_surface_csv(rows: Iterable[SurfaceRow], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SURFACE_HEADER)
    for r in rows:
        writer.writerow([r.b, r.c, repr(float(r.power)), r.size_product])
