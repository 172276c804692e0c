"""Acceptance criteria 1-8.

Each test carries an ``acceptance`` marker; the conftest hook prints one
PASS/FAIL line per criterion at the end of the run.
"""

import math

import numpy as np
import pytest
from conftest import (
    POWER_TOL,
    SIZE_TABLE,
    lambda_matches,
    sized_design,
    sized_worst_case,
)
from scipy import stats

from anovapower.bounds import (
    WorstCaseInput,
    exact_power,
    extremal_effects,
    guaranteed_power,
    lambda_min,
)
from anovapower.catalog import CATALOG, DesignPoint, VarianceSpec, lambda_exact, lookup
from anovapower.distributions import FParams, central_f_cdf, noncentral_f_cdf
from anovapower.simulate import SimConfig, empirical_power, power_surface
from anovapower.sizing import SizeRequest, min_size, min_size_real, power_table

EXACT = [p for p in CATALOG if p.exact]
Z99 = 2.5758293035489004


def acceptance(number, title):
    return pytest.mark.acceptance(number, title)


def random_levels(plan, rng, lo=2, hi=6):
    levels = {f.lower(): int(rng.integers(lo, hi)) for f in plan.model.factors}
    return DesignPoint(levels, int(rng.integers(2, 5)))


def random_components(plan, rng):
    return {c: float(rng.uniform(0.05, 3.0)) for c in plan.structure.random_components}


# -- 1 -----------------------------------------------------------------------------


@acceptance(1, "reference sizing table")
class TestReferenceTable:
    def test_left_blocks(self, sized_model):
        spec = SIZE_TABLE[sized_model]
        plan = lookup(sized_model)
        wc = sized_worst_case(sized_model)
        for values, df1, df2, lam, power in spec["left"]:
            res = guaranteed_power(plan, sized_design(sized_model, values), wc, 0.05)
            assert (res.df1, res.df2) == (df1, df2)
            assert lambda_matches(res.lam, lam)
            assert abs(res.power - power) <= POWER_TOL
        rows = power_table(sized_model, spec["product"], 0.05, wc, {"a": 6})
        assert [tuple(r.design[p] for p in spec["params"]) for r in rows] == [r[0] for r in spec["left"]]

    def test_right_blocks(self, sized_model):
        spec = SIZE_TABLE[sized_model]
        for requirement, values, df1, df2, lam, power in spec["right"]:
            res = min_size(SizeRequest(sized_model, 0.05, requirement, sized_worst_case(sized_model), {"a": 6}))
            assert tuple(res.design[p] for p in spec["params"]) == values
            assert (res.df1, res.df2) == (df1, df2)
            assert lambda_matches(res.lam, lam)
            assert abs(res.power - power) <= POWER_TOL


# -- 2 -----------------------------------------------------------------------------


@acceptance(2, "crossed random sizing")
class TestTwoFactorSizing:
    wc = WorstCaseInput.total(1.0, 1.0)

    def test_two_factor(self):
        res = min_size(SizeRequest("A x B~", 0.05, 0.9, self.wc, {"a": 6}))
        assert (res.design["b"], res.design["n"]) == (35, 2)
        assert abs(res.power - 0.909083) <= POWER_TOL

    def test_three_factor_equivalent(self):
        two = min_size(SizeRequest("A x B~", 0.05, 0.9, self.wc, {"a": 6}))
        res = min_size(SizeRequest("A x B~ x C~", 0.05, 0.9, self.wc, {"a": 6}, assume_zero=("sag",)))
        assert (res.design["b"], res.design["c"], res.design["n"]) == (35, 2, 2)
        assert res.power == two.power


# -- 3 -----------------------------------------------------------------------------


@acceptance(3, "integer versus real optimum")
class TestBracket:
    req = dict(
        model="A x B~",
        alpha=0.1,
        power=0.9,
        worst_case=WorstCaseInput.components(7.0, {"sab": 0.01, "se": 8.0}),
        fixed_dims={"a": 15},
    )

    def test_real(self):
        res = min_size_real(SizeRequest(**self.req, mode="real"))
        assert abs(res.design["b"] - 4.019937) <= 1e-4
        assert res.design["n"] == 2
        assert res.power == pytest.approx(0.9, abs=1e-9)

    def test_integer_and_bracket(self):
        res = min_size(SizeRequest(**self.req))
        assert (res.design["b"], res.design["n"]) == (3, 3)
        assert abs(res.power - 0.902873) <= POWER_TOL
        assert res.bracket_sizes == [9, 10]
        assert res.search_trace and {e.size_factor for e in res.search_trace} <= {9, 10}


# -- 4 -----------------------------------------------------------------------------


def concentrated(plan, total):
    """All of the variance on the leading T term, whose coefficient is 1."""
    comps = {c: 0.0 for c in plan.structure.random_components}
    comps[plan.t_terms[0][0]] = total
    return VarianceSpec(comps)


@acceptance(4, "bound sharpness")
@pytest.mark.parametrize("plan", EXACT, ids=lambda p: p.formula)
def test_bound_sharpness(plan):
    rng = np.random.default_rng(1000 + plan.row)
    for _ in range(100):
        design = random_levels(plan, rng)
        delta = float(rng.uniform(0.1, 5.0))
        total = float(rng.uniform(0.1, 5.0))
        assert plan.t_terms[0][1].evaluate(design.values()) == 1
        eff = extremal_effects(plan, design, delta)
        worst = lambda_min(plan, design, WorstCaseInput.total(delta, total))
        assert lambda_exact(plan, design, eff, concentrated(plan, total)) == pytest.approx(worst, rel=1e-12)
        # with a fixed split the effect bound alone is attained
        v = VarianceSpec(random_components(plan, rng))
        given = lambda_min(plan, design, WorstCaseInput(delta, v))
        assert lambda_exact(plan, design, eff, v) == pytest.approx(given, rel=1e-12)


# -- 5 -----------------------------------------------------------------------------


def _power(plan, values, fixed, wc):
    levels = {k: v for k, v in {**fixed, **values}.items() if k != "n"}
    return guaranteed_power(plan, DesignPoint(levels, values["n"]), wc, 0.05).power


def check_dominance(plan, wc, fixed, base, product):
    """(i) doubling the pivot beats doubling any other searched parameter;
    (ii) among designs of a fixed size the pivot design has maximal power."""
    others = [p for p in plan.random_params if p != plan.pivot]
    up = _power(plan, {**base, plan.pivot: 2 * base[plan.pivot]}, fixed, wc)
    for p in others:
        assert up >= _power(plan, {**base, p: 2 * base[p]}, fixed, wc) - 1e-12, p
    rows = power_table(plan.formula, product, 0.05, wc, fixed)
    pivot_rows = [r for r in rows if all(r.design[p] == 2 for p in others)]
    assert len(pivot_rows) == 1
    assert pivot_rows[0].power >= max(r.power for r in rows) - 1e-12


@acceptance(5, "pivot dominance")
class TestPivotDominance:
    def test_reference_blocks(self, sized_model):
        spec = SIZE_TABLE[sized_model]
        plan = lookup(sized_model)
        wc = sized_worst_case(sized_model)
        for values, *_ in spec["left"] + [r[1:] for r in spec["right"]]:
            base = dict(zip(spec["params"], values))
            check_dominance(plan, wc, {"a": 6}, base, spec["product"])

    @pytest.mark.parametrize("plan", EXACT, ids=lambda p: p.formula)
    def test_random_configs(self, plan):
        rng = np.random.default_rng(2000 + plan.row)
        k = len(plan.random_params)
        for _ in range(50):
            fixed = {p: int(rng.integers(2, 7)) for p in plan.params if p not in plan.random_params}
            base = {p: int(rng.integers(2, 6)) for p in plan.random_params}
            wc = WorstCaseInput(float(rng.uniform(0.5, 3.0)), VarianceSpec(random_components(plan, rng)))
            product = 2 ** (k - 1) * int(rng.integers(2, 9))
            check_dominance(plan, wc, fixed, base, product)


# -- 6 -----------------------------------------------------------------------------


def scaled_config(plan, rng, seed, reps):
    """Random zero-margin effects scaled so the analytic power lies in a useful range."""
    design = random_levels(plan, rng, 2, 5)
    comps = random_components(plan, rng)
    shape = tuple(design.values()[f.lower()] for f in plan.effect_factors)
    eff = rng.standard_normal(shape)
    for axis in range(len(shape)):
        eff -= eff.mean(axis=axis, keepdims=True)
    target = float(rng.uniform(2.0, 15.0))
    eff *= math.sqrt(target / lambda_exact(plan, design, eff, VarianceSpec(comps)))
    return SimConfig(plan.model, design, eff, comps, replications=reps, seed=seed)


@acceptance(6, "Monte Carlo cross-validation")
@pytest.mark.parametrize("plan", EXACT, ids=lambda p: p.formula)
def test_monte_carlo_matches_analytic(plan):
    reps = 20_000
    cfg = scaled_config(plan, np.random.default_rng(3000 + plan.row), seed=plan.row, reps=reps)
    res = empirical_power(cfg, threads=1)
    p = exact_power(plan, cfg.design, cfg.effects, VarianceSpec(cfg.variance.components), cfg.alpha).power
    assert res.analytic_power == p
    assert abs(res.rate - p) <= Z99 * math.sqrt(p * (1 - p) / reps)


# -- 7 -----------------------------------------------------------------------------

SPLIT_KEYS = ("sbA", "sg", "sag", "sbgA", "se")
SPLIT_B = dict(zip(SPLIT_KEYS, (10, 5, 0, 5, 5)))
SPLIT_EVEN = dict(zip(SPLIT_KEYS, (5, 5, 5, 5, 5)))
SPLIT_C = dict(zip(SPLIT_KEYS, (0, 5, 10, 5, 5)))

# approximate model, vanishing component, equivalent exact model, components it keeps.
# The kept ones are those in the EMS of the equivalent denominator: for
# (A > B~) x C~ with AC = 0, E(MS_B(A)) = e + n BC(A) + cn B(A).
EQUIVALENCES = [
    ("A x B~ x C~", "AC", "(A x B~) > C~", ("B", "AB", "ABC", "e")),
    ("A x B~ x C~", "AB", "(A x C~) > B~", ("C", "AC", "ABC", "e")),
    ("(A > B~) x C~", "AB", "(A x C~) > B~", ("C", "AC", "ABC", "e")),
    ("(A > B~) x C~", "AC", "A > B~ > C~", ("AB", "ABC", "e")),
]


@acceptance(7, "approximate-model equivalence")
class TestEquivalence:
    @pytest.mark.parametrize("approx,zero,exact,kept", EQUIVALENCES, ids=lambda x: str(x))
    def test_simulated_matches_equivalent_exact(self, approx, zero, exact, kept):
        reps = 10_000
        rng = np.random.default_rng(len(approx) + len(zero))
        plan = lookup(approx)
        comps = random_components(plan, rng)
        comps[zero] = 0.0
        design = DesignPoint({"a": 4, "b": 3, "c": 3}, 2)
        cfg = SimConfig.extremal(approx, design, 2.5, comps, replications=reps, seed=7)
        res = empirical_power(cfg, "equivalent", threads=1)
        eq = lookup(exact)
        eq_comps = {k: comps[k] for k in kept}
        want = exact_power(eq, design, cfg.effects, VarianceSpec(eq_comps), 0.05).power
        assert res.analytic_power == pytest.approx(want, abs=1e-14)
        assert abs(res.rate - want) <= Z99 * math.sqrt(want * (1 - want) / reps)

    @pytest.mark.parametrize(
        "variance,exact,comps",
        [
            (SPLIT_B, "A > B~ > C~", {"sbA": 10, "sgAB": 5, "se": 5}),
            (SPLIT_C, "(A x C~) > B~", {"sag": 10, "sbAC": 5, "sg": 5, "se": 5}),
        ],
        ids=["left", "right"],
    )
    def test_outer_panels_analytic(self, variance, exact, comps):
        rows = power_surface("(A > B~) x C~", range(2, 26), range(2, 26), 2, 0.05, 5.0, variance, {"a": 6})
        assert len(rows) == 24 * 24
        plan = lookup(exact)
        wc = WorstCaseInput.components(5.0, comps)
        for r in rows:
            want = guaranteed_power(plan, DesignPoint({"a": 6, "b": r.b, "c": r.c}, 2), wc, 0.05).power
            assert r.power == want
            assert r.ci_halfwidth is None

    def test_middle_panel_properties(self):
        points = [2, 6, 14]
        rows = power_surface(
            "(A > B~) x C~", points, points, 2, 0.05, 5.0, SPLIT_EVEN, {"a": 6}, replications=10_000, seed=0, threads=1
        )
        grid = {(r.b, r.c): r for r in rows}
        assert all(0.0 <= r.power <= 1.0 and r.ci_halfwidth > 0 for r in rows)
        # power grows along each axis well beyond the simulation noise
        for lo, hi in zip(points, points[1:]):
            for other in points:
                for a, b in [((lo, other), (hi, other)), ((other, lo), (other, hi))]:
                    gap = grid[b].power - grid[a].power
                    assert gap > -3 * (grid[a].ci_halfwidth + grid[b].ci_halfwidth)
        assert grid[(14, 14)].power > grid[(2, 2)].power + 0.3
        # symmetric components: swapping b and c changes power by noise only
        for b in points:
            for c in points:
                diff = abs(grid[(b, c)].power - grid[(c, b)].power)
                assert diff <= 3 * (grid[(b, c)].ci_halfwidth + grid[(c, b)].ci_halfwidth) + 0.25


# -- 8 -----------------------------------------------------------------------------


@acceptance(8, "distribution layer")
class TestDistributionLayer:
    def test_monte_carlo_oracle(self):
        rng = np.random.default_rng(8)
        draws = 10_000_000
        for _ in range(20):
            d1 = float(rng.uniform(1.0, 30.0))
            d2 = float(rng.uniform(2.0, 60.0))
            lam = float(rng.uniform(0.0, 40.0))
            num = rng.noncentral_chisquare(d1, lam, draws) / d1 if lam > 0 else rng.chisquare(d1, draws) / d1
            ratio = num / (rng.chisquare(d2, draws) / d2)
            x = float(np.quantile(ratio[:10_000], rng.uniform(0.1, 0.9)))
            p = noncentral_f_cdf(x, FParams(d1, d2, lam))
            empirical = np.count_nonzero(ratio <= x) / draws
            assert abs(empirical - p) <= 3 * math.sqrt(p * (1 - p) / draws), (d1, d2, lam, x)

    def test_central_reduction(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            d1, d2 = rng.uniform(0.5, 200.0, 2)
            x = float(rng.uniform(0.01, 10.0))
            p = noncentral_f_cdf(x, FParams(d1, d2, 0.0))
            assert abs(p - central_f_cdf(x, d1, d2)) <= 1e-13
            assert abs(p - stats.f.cdf(x, d1, d2)) <= 1e-13
