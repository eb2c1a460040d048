import math

import pytest

from prophet_samples import (
    ExplicitT,
    Instance,
    MaxSample,
    OrdinalRank,
    ValueDist,
    case1_instance,
    case2_instance,
    default_case2_boxes,
    dominance_check,
    exact_single_sample_value,
    mc_ratio,
    ordinal_upper_bound_sweep,
    semi_exact_ordinal,
)
from prophet_samples.evaluation import (
    RATIO_CSV_HEADER,
    _exact_selected_distribution,
    derive_seed,
    diagnostics_sandwich_sweep,
    random_discrete_instance,
    random_mixture_instance,
    ratio_csv_row,
)


# -- mc_ratio ----------------------------------------------------------------------


def test_mc_ratio_sure_thing():
    inst = Instance((ValueDist.atom(1.0),))
    report = mc_ratio(inst, ExplicitT(0.5), 1, 5000, seed=1)
    assert report.alg_value == 1.0
    assert report.ratio == 1.0
    assert report.ci_halfwidth == 0.0


def test_mc_ratio_instance_a(instance_a):
    report = mc_ratio(instance_a, MaxSample(), 1, 200_000, seed=7)
    # exact value 0.75 from tie-break enumeration; allow 5 sigma
    sigma = report.ci_halfwidth / 1.96
    assert abs(report.alg_value - 0.75) < 5 * sigma
    assert report.prophet_value == pytest.approx(1.5, abs=1e-12)
    assert abs(report.ratio - 0.5) < 0.01


def test_mc_ratio_thread_determinism(instance_a):
    a = mc_ratio(instance_a, MaxSample(), 1, 50_000, seed=11, threads=1)
    b = mc_ratio(instance_a, MaxSample(), 1, 50_000, seed=11, threads=4)
    c = mc_ratio(instance_a, MaxSample(), 1, 50_000, seed=11, threads=16)
    assert a == b == c
    row = ratio_csv_row("a", MaxSample(), 1, a)
    assert row == ratio_csv_row("a", MaxSample(), 1, b)
    assert RATIO_CSV_HEADER.count(",") == row.count(",")


def test_mc_ratio_seed_sensitivity(instance_a):
    a = mc_ratio(instance_a, MaxSample(), 1, 20_000, seed=1)
    b = mc_ratio(instance_a, MaxSample(), 1, 20_000, seed=2)
    assert a.alg_value != b.alg_value


def test_mc_ratio_ordinal_rank_bounds(instance_a):
    with pytest.raises(ValueError):
        mc_ratio(instance_a, OrdinalRank(3), 1, 100, seed=0)


# -- semi-exact --------------------------------------------------------------------


def test_semi_exact_instance_a(instance_a):
    reps = 100_000
    report = semi_exact_ordinal(instance_a, 1, 1, reps, seed=3)
    # two threshold outcomes, each evaluated exactly at 1.0 and 0.5
    scaled = 2.0 * reps * report.alg_value
    assert scaled == pytest.approx(round(scaled), abs=1e-6)
    sigma = report.ci_halfwidth / 1.96
    assert abs(report.alg_value - 0.75) < 5 * sigma


def test_semi_exact_deterministic_samples_zero_ci():
    inst = Instance((ValueDist.atom(7.0),))
    report = semi_exact_ordinal(inst, 3, 2, 500, seed=1)
    assert report.ci_halfwidth == 0.0
    # threshold ties all three samples; rank law Beta(2, 2) gives E[1-U] = 1/2
    assert report.alg_value == pytest.approx(3.5, abs=1e-12)


def test_semi_exact_thread_determinism(instance_a):
    a = semi_exact_ordinal(instance_a, 2, 2, 30_000, seed=5, threads=1)
    b = semi_exact_ordinal(instance_a, 2, 2, 30_000, seed=5, threads=8)
    assert a == b


def test_semi_exact_agrees_with_mc(rng):
    # overlapping confidence intervals on random mixture instances
    for i in range(10):
        inst = random_mixture_instance(rng)
        k = 3
        rank = 2
        mc = mc_ratio(inst, OrdinalRank(rank), k, 60_000, seed=derive_seed(9, i, 0))
        semi = semi_exact_ordinal(inst, k, rank, 20_000, seed=derive_seed(9, i, 1))
        gap = abs(mc.alg_value - semi.alg_value)
        spread = math.hypot(mc.ci_halfwidth / 1.96, semi.ci_halfwidth / 1.96)
        assert gap < max(3.0 * spread, 1e-9), (inst, gap, spread)


def test_semi_exact_rank_bounds(instance_a):
    with pytest.raises(ValueError):
        semi_exact_ordinal(instance_a, 1, 3, 100, seed=0)


def test_semi_exact_agrees_with_mc_at_scale():
    # the large-k benchmark: pooled pool of 1e5 samples per replication
    from prophet_samples import recommended_rank

    k = 10_000
    inst = case2_instance(k, 10)
    rank = recommended_rank(k)
    mc = mc_ratio(inst, OrdinalRank(rank), k, 2000, seed=31, threads=4)
    semi = semi_exact_ordinal(inst, k, rank, 10_000, seed=32)
    spread = math.hypot(mc.ci_halfwidth / 1.96, semi.ci_halfwidth / 1.96)
    assert abs(mc.alg_value - semi.alg_value) < 4.0 * spread
    assert 0.40 <= mc.ratio <= 0.46


# -- exact single-sample ---------------------------------------------------------------


def test_exact_single_sample_instance_a(instance_a):
    assert exact_single_sample_value(instance_a) == pytest.approx(0.75, abs=1e-12)


def test_exact_single_sample_lone_atom():
    # sample equals the value; the tie is won half the time
    inst = Instance((ValueDist.atom(3.0),))
    assert exact_single_sample_value(inst) == pytest.approx(1.5, abs=1e-12)


def test_exact_single_sample_matches_mc(rng):
    for _ in range(5):
        inst = random_discrete_instance(rng, max_boxes=3, max_support=3)
        exact = exact_single_sample_value(inst)
        mc = mc_ratio(inst, MaxSample(), 1, 120_000, seed=17)
        sigma = max(mc.ci_halfwidth / 1.96, 1e-9)
        assert abs(mc.alg_value - exact) < 5 * sigma


def test_exact_single_sample_rejects_continuous():
    with pytest.raises(ValueError):
        exact_single_sample_value(Instance((ValueDist.uniform(0, 1),)))


def test_exact_single_sample_rejects_large():
    boxes = tuple(ValueDist.discrete({float(i): 1.0}) for i in range(7))
    with pytest.raises(ValueError):
        exact_single_sample_value(Instance(boxes))


def quad_selected_distribution_oracle(inst, k):
    """Independent route to the max-sample selected-value law.

    Enumerates sample pools directly and integrates each walk against the
    threshold's Beta rank density with adaptive quadrature, sharing no code
    with the moment-based evaluator.
    """
    import itertools
    import math as m

    from scipy.integrate import quad

    supports = [sorted(b.atoms().items()) for b in inst.boxes]
    slots = [s for s in supports for _ in range(k)]
    dist = {}
    for combo in itertools.product(*slots):
        prob = 1.0
        for _, p in combo:
            prob *= p
        pool = sorted((v for v, _ in combo), reverse=True)
        t = pool[0]
        mult = sum(1 for v in pool if v == t)
        norm = mult  # Beta(mult, 1) density is mult * u^(mult-1)

        def weight(i, w):
            def integrand(u):
                dens = norm * u ** (mult - 1)
                alive = 1.0
                for box in inst.boxes[:i]:
                    alive *= box.cdf_left(t) + box.mass_at(t) * u
                sel = 1.0 if w > t else (1.0 - u)
                return dens * alive * sel

            val, _ = quad(integrand, 0.0, 1.0, epsabs=1e-12, limit=100)
            return val

        for i, box in enumerate(inst.boxes):
            for w, p in box.atoms().items():
                if w < t:
                    continue
                dist[w] = dist.get(w, 0.0) + prob * p * weight(i, w)
    return dist


def test_selected_distribution_matches_quadrature_oracle(rng):
    for _ in range(6):
        inst = random_discrete_instance(rng, max_boxes=3, max_support=3)
        got = _exact_selected_distribution(inst, MaxSample(), 1)
        want = quad_selected_distribution_oracle(inst, 1)
        keys = set(got) | set(want)
        for key in keys:
            assert got.get(key, 0.0) == pytest.approx(want.get(key, 0.0), abs=1e-10)


def test_exact_threshold_value_continuous_off_atoms(instance_a):
    from prophet_samples import exact_static_threshold_value

    for t in (0.3, 1.2, 1.9):
        base = exact_static_threshold_value(instance_a, t)
        for h in (1e-7, -1e-7):
            assert exact_static_threshold_value(instance_a, t + h) == pytest.approx(
                base, abs=1e-5
            )


def test_survival_identity_for_expectation(instance_a):
    # E[ALG] equals the integral of the tail: sum over levels of gap * Pr[ALG >= x]
    selected = _exact_selected_distribution(instance_a, MaxSample(), 1)
    xs = sorted(v for v in selected if v > 0)
    total = 0.0
    prev = 0.0
    for x in xs:
        tail = sum(p for v, p in selected.items() if v >= x)
        total += (x - prev) * tail
        prev = x
    assert total == pytest.approx(exact_single_sample_value(instance_a), abs=1e-10)


# -- dominance ---------------------------------------------------------------------------


def test_dominance_instance_a_exact(instance_a):
    report = dominance_check(instance_a, MaxSample(), 1, 0.5, mode="exact")
    assert report.worst_x == 2.0
    assert report.worst_ratio == pytest.approx(0.5, abs=1e-12)
    assert report.passed


def test_dominance_exact_random_corpus(rng):
    for _ in range(20):
        inst = random_discrete_instance(rng)
        report = dominance_check(inst, MaxSample(), 1, 0.5, mode="exact")
        assert report.worst_ratio >= 0.5 - 1e-9, inst


def test_dominance_single_deterministic_box():
    report = dominance_check(
        Instance((ValueDist.atom(2.0),)), MaxSample(), 1, 0.5, mode="exact"
    )
    # tie with the only sample is won exactly half the time
    assert report.worst_ratio == pytest.approx(0.5, abs=1e-12)


def test_dominance_mc_mode(instance_a):
    report = dominance_check(
        instance_a, MaxSample(), 1, 0.5, mode="mc", reps=200_000, seed=23
    )
    assert report.mode == "mc"
    assert abs(report.worst_ratio - 0.5) < 0.02


def test_dominance_mc_thread_determinism(instance_a):
    a = dominance_check(instance_a, MaxSample(), 1, 0.5, mode="mc", reps=40_000, seed=3, threads=1)
    b = dominance_check(instance_a, MaxSample(), 1, 0.5, mode="mc", reps=40_000, seed=3, threads=8)
    assert a == b


def test_dominance_validation(instance_a):
    with pytest.raises(ValueError):
        dominance_check(instance_a, MaxSample(), 1, 0.5, mode="nope")
    with pytest.raises(ValueError):
        dominance_check(instance_a, MaxSample(), 1, 0.5, mode="mc", reps=0)
    with pytest.raises(ValueError):
        dominance_check(Instance((ValueDist.uniform(0, 1),)), MaxSample(), 1, 0.5)


# -- benchmark instances -------------------------------------------------------------------


def test_case1_structure():
    inst = case1_instance(10)
    assert inst.n == 2
    weights = [w for w, _, _ in inst.boxes[1].segments]
    assert weights == pytest.approx([0.99, 0.01], abs=1e-15)
    assert inst.prophet_expectation() >= 10.0
    with pytest.raises(ValueError):
        case1_instance(1)


def test_case2_structure():
    inst = case2_instance(25, 3)
    assert inst.n == 3
    assert len(set(inst.boxes)) == 1
    assert inst.prophet_expectation() >= 25.0
    with pytest.raises(ValueError):
        case2_instance(25, 1)


def test_default_case2_boxes():
    assert default_case2_boxes(10_000) == 10
    assert default_case2_boxes(1000) == 5
    assert default_case2_boxes(16) == 2
    assert default_case2_boxes(2) == 2


def test_sweep_determinism():
    rows_a = ordinal_upper_bound_sweep(60, [1, 20, 40], 500, seed=14)
    rows_b = ordinal_upper_bound_sweep(60, [1, 20, 40], 500, seed=14)
    assert rows_a == rows_b
    for row in rows_a:
        assert row.min_ratio == min(row.case1.ratio, row.case2.ratio)


def test_derive_seed_stable():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
    assert 0 <= derive_seed(123456, 9) < (1 << 64)


def test_sandwich_sweep_clean():
    violations, worst = diagnostics_sandwich_sweep(1500, seed=77)
    assert violations == 0
    assert worst <= 1e-12
