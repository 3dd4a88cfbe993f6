#!/usr/bin/env python3
"""Smoke test for the pdcoupling extension module.

Builds nothing itself: expects `cargo build --release -p pdc-py` to have
produced target/release/libpdcoupling.so. The script stages the shared
object under a temp directory as `pdcoupling.so` and exercises one example
of every major operation.
"""

import math
import os
import shutil
import sys
import tempfile


def stage_module():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    candidates = [
        os.path.join(root, "target", "release", "libpdcoupling.so"),
        os.path.join(root, "target", "debug", "libpdcoupling.so"),
    ]
    src = next((c for c in candidates if os.path.exists(c)), None)
    if src is None:
        sys.exit("build the extension first: cargo build --release -p pdc-py")
    stage = tempfile.mkdtemp(prefix="pdcoupling-")
    shutil.copy(src, os.path.join(stage, "pdcoupling.so"))
    sys.path.insert(0, stage)


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    stage_module()
    import pdcoupling as pdc

    table = pdc.PrimeTable(10_000)
    assert table.prime_count == 1229
    assert table.primes_up_to(10) == [2, 3, 5, 7]
    approx(table.theta(10.0), math.log(210.0), 1e-12)
    assert table.extra_prime(0.5, 10.0) == 5
    prof = table.arith_profile(12)
    assert prof["prime_seq"] == [3, 2, 2] and prof["s"] == 4 and prof["flat"] == 3
    assert table.rho_half(12) == 4

    ladder = pdc.PrimeLadder(10.0)
    assert ladder.first_prime_powers(7) == [2, 3, 4, 5, 7, 8, 9]
    approx(ladder.lambda0, math.exp(-0.5772156649015329), 1e-12)
    h, r = ladder.step_h(0.7)
    approx(h, math.log(2.0), 1e-12)
    assert ladder.q_at(0.3) == 1
    mgf, mgf_err = ladder.theta_mgf(1.0)
    assert 1.5 < mgf < 4.0 and mgf_err < 0.05

    stream = pdc.Stream(7, [("smoke", 0)])
    sticks, remainder = pdc.sample_gem(stream, math.log(1000.0))
    approx(sum(sticks) + remainder, 1.0, 1e-9)

    x = 1000
    mu = pdc.estimate_mu(x, 50_000, 7, table, ladder)
    assert mu.n_samples == 50_000
    total = sum(mu.mass(v) for v in range(1, x + 1)) + mu.overflow_mass
    approx(total, 1.0, 1e-9)
    transport = pdc.Transport(mu)
    assert 0.0 < transport.dtv < 0.5

    cs = pdc.sample_coupled(stream, x, transport, table, ladder)
    assert 1 <= cs["n"] <= x
    assert cs["l1"] >= 0.0
    if cs["m_equals_n"]:
        assert cs["l1_bound_ok"]

    pmf1, pmf_err = pdc.jstar_pmf(1, 100, table)
    assert 0.6 <= pmf1 * math.log(100.0) <= 1.4 and pmf_err < 1e-6
    j = pdc.sample_jstar(stream, ladder, 100)
    assert 1 <= j <= 100

    assert pdc.tau_k(12, 2, table) == 6
    kf = pdc.sample_kfact(stream, 12, 2, "uniform", x, table)
    assert kf["d"][0] * kf["d"][1] == 12
    value, exact, _ = pdc.exact_joint_law(2, "uniform", 4, [0.5], table)
    assert exact
    approx(value, 2.0 / 3.0, 1e-12)

    lo, hi = pdc.rho_psi([0.6, 0.4], 0.0)
    approx(lo, 0.6, 1e-12)
    approx(hi, 0.6, 1e-12)

    approx(pdc.beta_cdf(0.5, 0.5, 0.25), 1.0 / 3.0, 1e-10)
    z = pdc.sample_dirichlet(stream, [0.2, 0.3, 0.5])
    approx(sum(z), 1.0, 1e-9)
    est, se = pdc.dirichlet_cdf(stream, [0.5, 0.5], [0.25], 10)
    approx(est, 1.0 / 3.0, 1e-10)
    assert se == 0.0

    zdt = pdc.dt_sample(stream, [0.5, 0.5])
    approx(sum(zdt), 1.0, 1e-9)

    draws = [pdc.Stream(9, [("ks", i)]).next_unit() for i in range(2000)]
    d, p = pdc.ks_test(draws, lambda t: min(max(t, 0.0), 1.0))
    assert p > 1e-4, f"KS p={p}"

    print("smoke test passed:", len(dir(pdc)), "module attributes")


if __name__ == "__main__":
    main()
