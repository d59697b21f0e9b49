"""End-to-end acceptance suite.

One test per criterion; each prints a single pass line with the measured
quantities when it succeeds.  Tolerances and time budgets are pinned in
the assertions, not configurable.
"""

import time
from fractions import Fraction

import numpy as np

from polymorph import cli
from polymorph import corrector as co
from polymorph import funcspace as fs
from polymorph import harmonics as hm
from polymorph import polytest as pt
from polymorph import predicates as pr
from polymorph import regularity as rg


def _random_measure(rng, n, s):
    if rng.random() < 0.4:
        return fs.ProductMeasure.uniform(n, s)
    probs = rng.uniform(0.2, 1.0, s)
    return fs.ProductMeasure.iid(fs.Measure(probs / probs.sum()), n)


def _random_table(rng, n, s, codomain):
    if codomain == "real":
        return fs.from_values(n, s, "real", rng.random(s ** n))
    cod = "bit" if s == 2 else "sym"
    return fs.from_values(n, s, cod, rng.integers(0, s, size=s ** n))


def _flip(rng, f, eta):
    v = f.values.copy()
    mask = rng.random(v.size) < eta
    v[mask] ^= 1
    return fs.from_values(f.n, 2, "bit", v)


def _flip_exact(rng, f, k):
    v = f.values.copy()
    idx = rng.choice(v.size, size=k, replace=False)
    v[idx] ^= 1
    return fs.from_values(f.n, 2, "bit", v)


# -- criterion 1: harmonic identities ------------------------------------------

def _identity_checks(rng, f, nu):
    dec = hm.Decomposition(f, nu)
    table = f.as_real()
    w = nu.weights()
    # Parseval
    assert abs(float(dec.norm2_by_mask.sum()) - dec.total_norm2) <= 1e-9
    # orthogonality of two random distinct components
    masks = np.nonzero(dec.norm2_by_mask > 0)[0]
    if masks.size >= 2:
        a, b = rng.choice(masks, size=2, replace=False)
        Sa = [i for i in range(f.n) if (int(a) >> i) & 1]
        Sb = [i for i in range(f.n) if (int(b) >> i) & 1]
        inner = float(np.dot(w, dec.component(Sa) * dec.component(Sb)))
        assert abs(inner) <= 1e-9
    # reconstruction
    assert float(np.abs(dec.reconstruct() - table).max()) <= 1e-9
    # splitting identity at a random coordinate
    i = int(rng.integers(0, f.n))
    rho = float(rng.uniform(0.2, 0.95))
    rest = [j for j in range(f.n) if j != i]
    sub_nu = nu.subset(rest)
    lhs = 0.0
    for a in range(f.s):
        sub = f.restrict(fs.PartialAssignment.from_dict(f.n, {i: a}, s=f.s))
        lhs += float(nu.measures[i].probs[a]) * hm.noise_stability(
            sub, rho, sub_nu)
    rhs = (hm.noise_stability(f, rho, nu)
           + (1 - rho) / rho * dec.noisy_influence(i, rho))
    assert abs(lhs - rhs) <= 1e-9


def test_criterion_1_harmonic_identity_suite():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    count = 0
    for _ in range(80):
        n = int(rng.integers(2, 11))
        _identity_checks(rng, _random_table(rng, n, 2, "bit"),
                         _random_measure(rng, n, 2))
        count += 1
    for t in range(60):
        n = int(rng.integers(2, 7))
        if t % 2 == 0:
            # indicator expansion of a symbol-valued function
            sym = _random_table(rng, n, 3, "sym")
            sigma = int(rng.integers(0, 3))
            f = fs.from_values(n, 3, "real",
                               (sym.values == sigma).astype(float))
        else:
            f = _random_table(rng, n, 3, "real")
        _identity_checks(rng, f, _random_measure(rng, n, 3))
        count += 1
    for _ in range(60):
        n = int(rng.integers(2, 11))
        _identity_checks(rng, _random_table(rng, n, 2, "real"),
                         _random_measure(rng, n, 2))
        count += 1
    elapsed = time.perf_counter() - start
    assert count == 200
    assert elapsed < 10.0
    print(f"criterion 1: PASS - 200 instances within 1e-9 "
          f"in {elapsed:.2f}s")


# -- criterion 2: regularity engine ----------------------------------------------

def _regularity_instance(rng):
    n = int(rng.integers(6, 15))
    m = int(rng.integers(1, 4))
    funcs = []
    for _ in range(m):
        kind = rng.random()
        if kind < 0.3:
            base = fs.dictator(n, int(rng.integers(0, n)))
        elif kind < 0.6:
            k = int(rng.integers(1, 4))
            S = rng.choice(n, size=k, replace=False).tolist()
            base = fs.character(n, S, int(rng.integers(0, 2)))
        elif kind < 0.8:
            k = int(rng.integers(1, 4))
            S = sorted(rng.choice(n, size=k, replace=False).tolist())
            table = rng.integers(0, 2, size=2 ** k)
            base = fs.junta(n, S, fs.from_values(k, 2, "bit", table))
        else:
            base = _random_table(rng, n, 2, "bit")
        funcs.append(_flip(rng, base, 0.05))
    return funcs, _random_measure(rng, n, 2)


def test_criterion_2_regularity_engine():
    rng = np.random.default_rng(202)
    rho, tau, eps, d = 0.7, 0.1, 0.1, 2
    required = (1 - rho) / rho * eps * tau
    start = time.perf_counter()
    steps_total = 0
    for _ in range(50):
        funcs, nu = _regularity_instance(rng)
        cert = rg.build_junta_noisy(funcs, nu, rho=rho, tau=tau, eps=eps)
        assert cert.regular
        assert len(cert.steps) <= cert.step_bound
        for t in range(len(cert.steps)):
            gain = cert.potentials[t + 1] - cert.potentials[t]
            assert gain >= required - 1e-12
        # noisy influence <= tau forces degree-d influence <= tau / rho^d
        for f in funcs:
            frac = rg.cell_regular_fraction(f, cert.junta, d,
                                            tau / rho ** d, nu)
            assert frac.regular_mass >= 1 - eps
        steps_total += len(cert.steps)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(f"criterion 2: PASS - 50 certificates, {steps_total} growth "
          f"steps, in {elapsed:.2f}s")


# -- criterion 3: BLR decoding under the uniform measure ---------------------------

def _xor_triple_violation(f) -> float:
    """Exhaustive count of f(x) ^ f(y) ^ f(x ^ y) over all (x, y) pairs.

    Columns of the parity predicate P_{3,0} are exactly the pairs
    (x_i, y_i, x_i ^ y_i), so this is the full column scan, blocked."""
    v = f.values.astype(np.int64)
    size = v.size
    ys = np.arange(size)
    viols = 0
    for lo in range(0, size, 512):
        xs = np.arange(lo, min(lo + 512, size))
        grid = v[xs[:, None] ^ ys[None, :]]
        viols += int((v[xs][:, None] ^ v[ys][None, :] ^ grid).sum())
    return viols / size ** 2


def test_criterion_3_blr_uniform():
    rng = np.random.default_rng(303)
    n = 12
    P = pr.parity_predicate(3, 0)
    start = time.perf_counter()
    checked_delta = 0
    for trial in range(100):
        eta = 0.01 if trial < 50 else 0.05
        k = round(eta * 2 ** n)
        size = int(rng.integers(1, n + 1))
        S = sorted(rng.choice(n, size=size, replace=False).tolist())
        b = int(rng.integers(0, 2))
        f = _flip_exact(rng, fs.character(n, S, b), k)
        dec = co.blr_decode_uniform(f)
        assert dec.support == tuple(S)
        assert dec.offset == b
        assert dec.distance == k / 2 ** n
        delta = _xor_triple_violation(f)
        if trial < 2:
            assert abs(delta - pt.violation_probability(P, [f, f, f])) \
                <= 1e-12
        if delta <= 0.05:
            checked_delta += 1
            assert dec.distance <= delta + 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    assert checked_delta > 0
    print(f"criterion 3: PASS - 100/100 recoveries, {checked_delta} "
          f"delta-bound checks, in {elapsed:.2f}s")


# -- criterion 4: monotone end-to-end ----------------------------------------------

def test_criterion_4_monotone_end_to_end():
    rng = np.random.default_rng(404)
    n, eta = 10, 0.01
    start = time.perf_counter()
    accepted = 0
    for trial in range(100):
        if trial % 2 == 0:
            P = pr.nand_predicate(2)
            shared = _flip(rng, fs.dictator(n, int(rng.integers(0, n))),
                           eta)
            funcs = [shared, shared]
        else:
            P = pr.nand_predicate(3)
            i = int(rng.integers(0, n))
            funcs = [_flip(rng, fs.dictator(n, i), eta) for _ in range(3)]
        res = co.correct_monotone(P, funcs, 0.1, d=2, tau=0.2)
        if not res.accepted:
            continue
        accepted += 1
        ok, _ = pt.is_generalized_polymorphism(P, res.gs)
        assert ok
        for f, g in zip(funcs, res.gs):
            assert np.all(g.values <= f.values)
        assert max(res.distances) <= 0.1
        if trial % 2 == 0:
            assert res.gs[0].equals(res.gs[1])
    elapsed = time.perf_counter() - start
    assert accepted >= 90
    assert elapsed < 120.0
    print(f"criterion 4: PASS - {accepted}/100 accepted in {elapsed:.2f}s")


# -- criterion 5: general pipeline with relations ------------------------------------

def test_criterion_5_general_with_relations():
    rng = np.random.default_rng(505)
    n, eta = 10, 0.02
    P = pr.parity_predicate(3, 0)
    accepted = 0
    for trial in range(100):
        size = int(rng.integers(1, 4))
        S = sorted(rng.choice(n, size=size, replace=False).tolist())
        b0, b1 = int(rng.integers(0, 2)), int(rng.integers(0, 2))
        offsets = (b0, b1, b0 ^ b1)
        funcs = [_flip(rng, fs.character(n, S, b), eta) for b in offsets]
        res = co.correct_general(P, funcs, 0.1, attempts=16,
                                 seed=1000 + trial)
        if not res.accepted:
            continue
        accepted += 1
        assert res.exact
        ok, _ = pt.is_generalized_polymorphism(P, res.gs)
        assert ok
        assert max(res.distances) <= 0.1
        decs = [co.blr_decode_uniform(g) for g in res.gs]
        assert all(d.distance == 0.0 for d in decs)
        assert len({d.support for d in decs}) == 1
    assert accepted >= 90
    print(f"criterion 5: PASS - {accepted}/100 accepted, outputs share "
          "one character support")


# -- criterion 6: Markov agreement bound ----------------------------------------------

def test_criterion_6_markov_agreement():
    rng = np.random.default_rng(606)
    held = 0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        count = int(rng.integers(1, 4))
        factors = []
        for _ in range(count):
            a = float(rng.uniform(0.05, 0.95))
            factors.append([[1 - a, a], [a, 1 - a]])
        assignment = rng.integers(0, count, size=n).tolist()
        chain = co.TransitionChain(factors, assignment)
        f = _random_table(rng, n, 2, "bit")
        rep = co.markov_agreement(chain, f)
        assert rep.miss_probability <= rep.bound + 1e-9
        held += 1
    assert held == 200
    print("criterion 6: PASS - bound held in 200/200 exhaustive instances")


# -- criterion 7: counting and hitting suite --------------------------------------------

def test_criterion_7_counting_and_hitting():
    rng = np.random.default_rng(707)
    P = pr.nand_predicate(2)
    mu = fs.Measure([float(p) for p in P.marginal(0)])
    qualifying = 0
    for _ in range(12):
        n = int(rng.integers(6, 11))
        nu = fs.ProductMeasure.iid(mu, n)
        pair = []
        for _ in range(2):
            if rng.random() < 0.5:
                t = -(-n // 3)  # ceil(n / 3)
                vals = [int(sum(x) >= t)
                        for x in fs.points_in_index_order(n, 2)]
                f = fs.from_values(n, 2, "bit", vals)
            else:
                f = _random_table(rng, n, 2, "bit")
            pair.append(f)
        regular = all(
            max(hm.low_degree_influence(f, i, 2, nu) for i in range(f.n))
            <= 0.15 for f in pair)
        if not regular:
            continue
        if any(fs.expectation(f, nu) < 0.2 for f in pair):
            continue
        qualifying += 1
        assert pt.joint_value_probability(P, pair, (1, 1)) > 0.0
    assert qualifying >= 6

    full = 0
    for _ in range(20):
        n = int(rng.integers(3, 8))
        raw = [int(v) for v in rng.integers(1, 6, size=4)]
        F = pr.full_predicate(2, 2,
                              weights=[Fraction(v, sum(raw)) for v in raw])
        pair = [_random_table(rng, n, 2, "bit") for _ in range(2)]
        ok = True
        for j, f in enumerate(pair):
            muj = fs.ProductMeasure.iid(F.marginal_measure(j), n)
            ok = ok and 0.2 <= fs.expectation(f, muj) <= 0.8
        if not ok:
            continue
        full += 1
        for alpha in [(0, 0), (0, 1), (1, 0), (1, 1)]:
            assert pt.joint_value_probability(F, pair, alpha) > 0.0
    assert full >= 10
    print(f"criterion 7: PASS - {qualifying} regular NAND instances hit "
          f"all-ones, {full} full-support instances hit every pattern")


# -- criterion 8: alphabet pipeline ------------------------------------------------------

def _ternary_nae():
    members = [w for w in fs.points_in_index_order(3, 3)
               if len(set(w)) > 1]
    return pr.Predicate(3, 3, members)


def test_criterion_8_alphabet_pipeline():
    rng = np.random.default_rng(808)
    P = _ternary_nae()
    assert len(pr.flexible_coordinates(P)) == P.m
    n, eta = 6, 0.02
    accepted = 0
    for trial in range(30):
        i = int(rng.integers(0, n))
        funcs = []
        for _ in range(3):
            v = fs.dictator(n, i, 3).values.copy()
            mask = rng.random(v.size) < eta
            shift = rng.integers(1, 3, size=v.size)
            v[mask] = (v[mask] + shift[mask]) % 3
            funcs.append(fs.from_values(n, 3, "sym", v))
        res = co.correct_alphabet(P, funcs, 0.1, attempts=16,
                                  seed=2000 + trial)
        if not res.accepted:
            continue
        accepted += 1
        assert res.exact
        ok, _ = pt.is_generalized_polymorphism(P, res.gs)
        assert ok
        assert max(res.distances) <= 0.1
    assert accepted >= 24
    print(f"criterion 8: PASS - {accepted}/30 accepted, all exhaustively "
          "exact with distance <= 0.1")


# -- criterion 9: determinism --------------------------------------------------------------

def _general_fingerprint(seed):
    rng = np.random.default_rng(909)
    P = pr.parity_predicate(3, 0)
    funcs = [_flip(rng, fs.character(8, [1, 4], b), 0.02)
             for b in (0, 1, 1)]
    res = co.correct_general(P, funcs, 0.1, attempts=8, seed=seed)
    parts = [res.accepted, res.exact, tuple(res.distances),
             res.trace.junta, res.trace.eta]
    parts.append(tuple(g.values.tobytes() for g in res.gs))
    parts.append(tuple((a.index, a.exact, a.characters_preserved,
                        a.total_distance) for a in res.trace.attempts))
    if res.trace.restriction is not None:
        parts.append(tuple(res.trace.restriction.patterns))
    return repr(parts)


def _batch_fingerprint(tmp_path):
    pr.save_predicate(tmp_path / "nand2.pred", pr.nand_predicate(2))
    cfg = tmp_path / "det.cfg"
    cfg.write_text(
        "seed = 17\n"
        "[run nand]\n"
        "pipeline = monotone\npred = nand2.pred\nn = 8\n"
        "plant = dictator:4\nflip = 0.01\nrepeats = 4\n"
        "eps = 0.1\ntau = 0.2\n"
        "[run gen]\n"
        "pipeline = general\npred = nand2.pred\nn = 7\n"
        "plant = dictator:2\nflip = 0.01\nrepeats = 2\n"
        "eps = 0.1\nattempts = 8\n")
    header, rows = cli.run_experiment(cli.parse_experiment_config(cfg))
    return repr((header, rows))


def test_criterion_9_determinism(tmp_path):
    assert _general_fingerprint(3) == _general_fingerprint(3)
    assert _batch_fingerprint(tmp_path) == _batch_fingerprint(tmp_path)
    f = fs.from_values(6, 2, "bit",
                       np.random.default_rng(99).integers(0, 2, 64))
    assert repr(co.blr_decode_uniform(f)) == repr(co.blr_decode_uniform(f))
    print("criterion 9: PASS - corrector, batch and decoder reports are "
          "rerun-identical")
