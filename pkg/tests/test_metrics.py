"""Gap functions, distances, and the estimator verification suite."""

import numpy as np
import pytest

from vistep import (
    BilinearGame,
    CheckRow,
    FREE,
    ProxSpec,
    Quantizer,
    VIProblem,
    VerificationReport,
    coord,
    distance_to_solution,
    duality_gap_bilinear,
    eval_full,
    fulldet,
    gen_mixing_vi,
    gen_policeman_burglar,
    gen_quadratic_vi,
    importance,
    importance_weights,
    local,
    noisy,
    past,
    quant,
    qvr,
    random_feasible,
    restricted_gap_ball,
    restricted_gap_bruteforce,
    rng_stream,
    verify_assumption2,
    verify_unbiasedness,
    vr,
)
from vistep.estimators import sample_half_batch


def two_by_two(mat):
    """Wrap a 2x2 payoff matrix as a game on the product of two simplices."""
    mat = np.asarray(mat, dtype=float)
    game = BilinearGame(n=2, mats=mat[None], avg=mat)
    return VIProblem(
        d=4,
        prox=ProxSpec(blocks=(2, 2)),
        M=1,
        payload=game,
        L=float(np.linalg.norm(mat, 2)),
        L_m=np.array([float(np.linalg.norm(mat, 2))]),
    )


def pvb3():
    return gen_policeman_burglar(3, seed=1)


def mixing3():
    base = [gen_quadratic_vi(8, 0.5, 2.0, seed=3) for _ in range(3)]
    return gen_mixing_vi(base, lam=1.0)


def test_closed_form_gap_matching_pennies():
    p = two_by_two([[1.0, -1.0], [-1.0, 1.0]])
    uniform = np.array([0.5, 0.5, 0.5, 0.5])
    assert duality_gap_bilinear(p.payload, uniform) == 0.0
    pure = np.array([1.0, 0.0, 1.0, 0.0])
    assert duality_gap_bilinear(p.payload, pure) == 2.0


def test_closed_form_gap_diagonal_saddle():
    p = two_by_two(np.diag([1.0, 3.0]))
    saddle = np.array([0.75, 0.25, 0.75, 0.25])
    assert duality_gap_bilinear(p.payload, saddle) == 0.0
    uniform = np.array([0.5, 0.5, 0.5, 0.5])
    assert duality_gap_bilinear(p.payload, uniform) == pytest.approx(1.0, abs=1e-15)


def test_bruteforce_matches_closed_form():
    p = gen_policeman_burglar(2, seed=0)
    rng = rng_stream(9, 0)
    for _ in range(20):
        z = random_feasible(p, rng)
        report = restricted_gap_bruteforce(p, z)
        assert report.value == pytest.approx(duality_gap_bilinear(p.payload, z), abs=1e-10)
        assert report.n_candidates == 16
        # best responses sit at simplex vertices
        for block in (report.maximizer[:4], report.maximizer[4:]):
            assert sorted(block) == pytest.approx([0.0, 0.0, 0.0, 1.0], abs=0)


def test_gap_nonnegative_and_convex():
    p = gen_policeman_burglar(2, seed=3)
    game = p.payload
    rng = rng_stream(10, 0)
    for _ in range(10):
        a = random_feasible(p, rng)
        b = random_feasible(p, rng)
        ga, gb = duality_gap_bilinear(game, a), duality_gap_bilinear(game, b)
        assert ga >= 0.0 and gb >= 0.0
        for lam in (0.25, 0.5, 0.9):
            mid = duality_gap_bilinear(game, lam * a + (1.0 - lam) * b)
            assert mid <= lam * ga + (1.0 - lam) * gb + 1e-10


def test_ball_gap_zero_at_solution():
    p = gen_quadratic_vi(8, 0.5, 2.0, seed=1)
    z = p.known_solution
    report = restricted_gap_ball(p, z, 1.0, center=z)
    assert abs(report.value) <= 1e-12
    np.testing.assert_allclose(report.maximizer, z, atol=1e-12)


def test_ball_gap_positive_monotone_and_maximal():
    p = gen_quadratic_vi(8, 0.5, 2.0, seed=1)
    z = p.known_solution + np.eye(8)[0]
    small = restricted_gap_ball(p, z, 0.5, center=z)
    big = restricted_gap_ball(p, z, 1.0, center=z)
    assert small.value > 1e-3
    assert big.value >= small.value - 1e-12
    assert np.linalg.norm(big.maximizer - z) <= 1.0 + 1e-9
    # no random point in the ball beats the reported maximum
    rng = rng_stream(11, 0)
    for _ in range(200):
        direction = rng.normal(8)
        direction /= np.linalg.norm(direction)
        u = z + float(rng.uniform()) * direction
        assert float(np.dot(eval_full(p, u), z - u)) <= big.value + 1e-9


def test_gap_argument_errors():
    quad = gen_quadratic_vi(4, 0.5, 2.0, seed=0)
    with pytest.raises(TypeError):
        restricted_gap_bruteforce(quad, np.zeros(4))
    game = gen_policeman_burglar(2, seed=0)
    free_game = VIProblem(d=8, prox=FREE, M=2, payload=game.payload, L=game.L, L_m=game.L_m)
    with pytest.raises(ValueError):
        restricted_gap_bruteforce(free_game, np.zeros(8))
    with pytest.raises(ValueError):
        restricted_gap_ball(quad, np.zeros(4), 0.0)

    class NoLinear:
        def full(self, z):
            return z

    p = VIProblem(d=3, prox=FREE, M=1, payload=NoLinear(), L=1.0, L_m=np.ones(1))
    with pytest.raises(TypeError):
        restricted_gap_ball(p, np.zeros(3), 1.0)


def test_distance_to_solution():
    p = gen_quadratic_vi(6, 0.5, 2.0, seed=2)
    z = p.known_solution + np.array([3.0, 4.0, 0.0, 0.0, 0.0, 0.0])
    assert distance_to_solution(p, z) == pytest.approx(5.0, rel=1e-12)
    with pytest.raises(ValueError):
        distance_to_solution(gen_policeman_burglar(2, seed=0), np.zeros(8))


def test_verification_report_merging():
    assert VerificationReport([]).all_pass
    ok = CheckRow("unbiased", "vr", 0.0, 1.0, 0.0, 10, True)
    bad = CheckRow("unbiased", "vr", 2.0, 1.0, 2.0, 10, False)
    report = VerificationReport([ok])
    assert report.all_pass
    report.extend(VerificationReport([bad]))
    assert len(report.rows) == 2
    assert not report.all_pass


def test_unbiasedness_exact_enumerable_kinds():
    p = pvb3()
    kinds = [
        fulldet(),
        vr(),
        coord(),
        quant(Quantizer("randk", k=5, d=18)),
        qvr(Quantizer("randk", k=5, d=18)),
        importance((0.5, 0.3, 0.2)),
    ]
    for kind in kinds:
        report = verify_unbiasedness(kind, p, n_points=4)
        assert report.all_pass, kind.name
        assert len(report.rows) == 1
        assert report.rows[0].lemma == "unbiased"
        assert report.rows[0].variant == kind.name
    report = verify_unbiasedness(local(2.0 / 3.0), mixing3(), n_points=4)
    assert report.all_pass


def test_unbiasedness_monte_carlo_and_negative_control():
    p = pvb3()
    assert verify_unbiasedness(noisy(0.7), p, n_points=3, n_samples=4000).all_pass

    def shrunk(problem, z_half, w, fw, rng, n):
        return 0.5 * sample_half_batch(vr(), problem, z_half, w, fw, rng, n)

    report = verify_unbiasedness(vr(), p, n_points=3, n_samples=4000, sampler=shrunk)
    assert not report.all_pass
    with pytest.raises(ValueError):
        verify_unbiasedness(noisy(0.7), p, n_samples=1)


def test_assumption2_exact_modes():
    report = verify_assumption2(coord(), pvb3(), n_points=50)
    assert report.all_pass
    assert [r.lemma for r in report.rows] == ["diff-second-moment", "residual-second-moment"]
    quad6 = gen_quadratic_vi(6, 0.5, 3.0, seed=2)
    for k in (1, 2, 3):
        kind = quant(Quantizer("randk", k=k, d=6))
        assert verify_assumption2(kind, quad6, n_points=50).all_pass


def test_assumption2_monte_carlo_mode():
    report = verify_assumption2(vr(), pvb3(), n_points=2, n_samples=2000)
    assert report.all_pass
    assert all(r.n == 2000 for r in report.rows)


def test_assumption2_stored_half_step_rows():
    p = pvb3()
    quiet = verify_assumption2(past(), p, n_points=6)
    assert quiet.all_pass
    assert [r.lemma for r in quiet.rows] == [
        "diff-second-moment",
        "sigma-recursion",
        "residual-second-moment",
    ]
    loud = verify_assumption2(past(0.3), p, n_points=6)
    assert loud.all_pass
    assert [r.lemma for r in loud.rows] == ["diff-second-moment", "residual-second-moment"]
