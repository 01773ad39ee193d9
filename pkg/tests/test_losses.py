import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protomm.losses import (
    LossConfig,
    ViewBundle,
    between_mod_loss,
    ce_term,
    clip_loss,
    clip_loss_with_grad,
    mpp_from_embeddings,
    mpp_loss,
    nt_xent,
    nt_xent_with_grad,
    slip_loss,
    within_mod_loss,
)
from protomm.prototypes import AssignmentConfig, PrototypeBank, sinkhorn_targets


def _rand_dist(rng, B, P):
    x = rng.random((B, P)) + 1e-3
    return x / x.sum(axis=1, keepdims=True)


def _bundle(rng, M=2, A=2, B=4, P=4):
    keys = [(f"mod{m}", a) for m in range(M) for a in range(A)]
    return ViewBundle(
        U={k: _rand_dist(rng, B, P) for k in keys},
        V={k: _rand_dist(rng, B, P) for k in keys},
    )


def _unit_rows(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class TestCeTerm:
    def test_onehot_match_is_zero(self):
        V = np.array([[0.0, 1.0, 0.0]])
        U = np.array([[0.0, 1.0, 0.0]])
        assert ce_term(V, U) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_pair_is_log2(self):
        V = U = np.array([[0.5, 0.5]])
        assert ce_term(V, U) == pytest.approx(np.log(2), abs=1e-12)

    def test_gibbs_inequality_minimizer_is_v(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            V = _rand_dist(rng, 1, 5)
            U = _rand_dist(rng, 1, 5)
            entropy = ce_term(V, V)
            assert ce_term(V, U) >= entropy - 1e-9
        V = _rand_dist(rng, 3, 7)
        assert ce_term(V, V) == pytest.approx(
            float(-(V * np.log(V)).sum(axis=1).mean()), abs=1e-12
        )


class TestTermCounts:
    @pytest.mark.parametrize("M,A", list(itertools.product(range(1, 5), range(1, 5))))
    def test_counts_match_pair_enumeration_oracle(self, M, A):
        # oracle: enumerate ordered pairs directly
        mods, views = range(M), range(A)
        within_oracle = len(
            [(m, a, b) for m in mods for a in views for b in views if a != b]
        )
        between_oracle = len(
            [
                (m, n, a, b)
                for m in mods
                for n in mods
                if n != m
                for a in views
                for b in views
            ]
        )
        assert within_oracle == M * A * (A - 1)
        assert between_oracle == M * (M - 1) * A * A
        rng = np.random.default_rng(M * 10 + A)
        bundle = _bundle(rng, M=M, A=A)
        # counts realized in the loss: all-uniform distributions give
        # count * log(P) exactly
        P = 4
        uni = {k: np.full((2, P), 1.0 / P) for k in bundle.U}
        ub = ViewBundle(U=dict(uni), V=dict(uni))
        if A >= 2:
            assert within_mod_loss(ub) == pytest.approx(within_oracle * np.log(P), abs=1e-9)
        if M >= 2:
            assert between_mod_loss(ub) == pytest.approx(between_oracle * np.log(P), abs=1e-9)


class TestMppLoss:
    def test_uniform_closed_form_m2_a2_p4(self):
        P = 4
        keys = [(m, a) for m in "xy" for a in (0, 1)]
        uni = {k: np.full((3, P), 0.25) for k in keys}
        bundle = ViewBundle(U=dict(uni), V=dict(uni))
        val = mpp_loss(bundle, LossConfig(alpha=0.5))
        expected = (0.5 * 4 * np.log(4) + 0.5 * 8 * np.log(4)) / 4  # = 1.5 log 4
        assert val == pytest.approx(expected, abs=1e-9)
        assert val == pytest.approx(1.5 * np.log(4), abs=1e-9)

    def test_alpha_one_is_within_only(self):
        rng = np.random.default_rng(1)
        bundle = _bundle(rng)
        val = mpp_loss(bundle, LossConfig(alpha=1.0))
        assert val == pytest.approx(within_mod_loss(bundle) / (bundle.A * bundle.M), abs=1e-12)

    def test_alpha_zero_is_between_only(self):
        rng = np.random.default_rng(2)
        bundle = _bundle(rng)
        val = mpp_loss(bundle, LossConfig(alpha=0.0))
        assert val == pytest.approx(between_mod_loss(bundle) / (bundle.A * bundle.M), abs=1e-12)

    def test_constant_bundle_scales_by_term_counts(self):
        # every (modality, view) shares one U and one V, so each of the
        # within (4) and between (8) summands equals the same ce value
        rng = np.random.default_rng(3)
        U, V = _rand_dist(rng, 4, 4), _rand_dist(rng, 4, 4)
        keys = [(m, a) for m in "pq" for a in (0, 1)]
        bundle = ViewBundle(U={k: U for k in keys}, V={k: V for k in keys})
        c = ce_term(V, U)
        assert within_mod_loss(bundle) == pytest.approx(4 * c, abs=1e-12)
        assert between_mod_loss(bundle) == pytest.approx(8 * c, abs=1e-12)
        val = mpp_loss(bundle, LossConfig(alpha=0.5))
        assert val == pytest.approx((0.5 * 4 * c + 0.5 * 8 * c) / 4, abs=1e-12)

    def test_m1_reduces_to_unimodal_swapped_prediction(self):
        rng = np.random.default_rng(4)
        bundle = _bundle(rng, M=1, A=2)
        val = mpp_loss(bundle, LossConfig(alpha=1.0))
        assert val == pytest.approx(within_mod_loss(bundle) / 2, abs=1e-12)
        with pytest.raises(ValueError):
            between_mod_loss(bundle)

    def test_m2_a1_between_has_two_terms(self):
        rng = np.random.default_rng(5)
        bundle = _bundle(rng, M=2, A=1)
        uni = {k: np.full((2, 4), 0.25) for k in bundle.U}
        ub = ViewBundle(U=dict(uni), V=dict(uni))
        assert between_mod_loss(ub) == pytest.approx(2 * np.log(4), abs=1e-9)
        with pytest.raises(ValueError):
            within_mod_loss(bundle)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(6)
        bundle = _bundle(rng, M=2, A=3)
        cfg = LossConfig(alpha=0.4)
        base = mpp_loss(bundle, cfg)
        # swap view indices 0 and 2 within each modality
        swap = {0: 2, 1: 1, 2: 0}
        swapped = ViewBundle(
            U={(m, swap[a]): u for (m, a), u in bundle.U.items()},
            V={(m, swap[a]): v for (m, a), v in bundle.V.items()},
        )
        assert mpp_loss(swapped, cfg) == pytest.approx(base, abs=1e-12)
        # swap the modality labels
        flip = {"mod0": "mod1", "mod1": "mod0"}
        flipped = ViewBundle(
            U={(flip[m], a): u for (m, a), u in bundle.U.items()},
            V={(flip[m], a): v for (m, a), v in bundle.V.items()},
        )
        assert mpp_loss(flipped, cfg) == pytest.approx(base, abs=1e-12)

    def test_incomplete_grid_rejected(self):
        u = np.full((2, 2), 0.5)
        with pytest.raises(ValueError, match="grid"):
            ViewBundle(U={("m", 0): u, ("m", 1): u, ("n", 0): u}, V={("m", 0): u, ("m", 1): u, ("n", 0): u})


class TestMppGradients:
    def test_gradients_match_finite_differences(self):
        # E=8, P_count=4, B=4, M=2, A=2 at 64-bit; targets held constant
        rng = np.random.default_rng(7)
        E, P, B = 8, 4, 4
        bank = PrototypeBank(E, P, seed=8, dtype=np.float64)
        keys = [(m, a) for m in "pq" for a in (0, 1)]
        embs = {k: _unit_rows(rng, B, E) for k in keys}
        acfg = AssignmentConfig(temperature=0.1, sinkhorn_epsilon=0.05, sinkhorn_iters=3)
        lcfg = LossConfig(alpha=0.5)
        targets = {k: sinkhorn_targets(embs[k] @ bank.matrix.data, acfg) for k in keys}
        loss, g_emb, g_P, _ = mpp_from_embeddings(embs, bank, acfg, lcfg, targets=targets)

        def f():
            return mpp_from_embeddings(embs, bank, acfg, lcfg, targets=targets)[0]

        eps = 1e-6
        worst = 0.0
        for k in keys:
            arr, grad = embs[k], g_emb[k]
            for idx in [(0, 0), (1, 3), (3, 7), (2, 4)]:
                orig = arr[idx]
                arr[idx] = orig + eps
                up = f()
                arr[idx] = orig - eps
                down = f()
                arr[idx] = orig
                fd = (up - down) / (2 * eps)
                worst = max(worst, abs(fd - grad[idx]) / max(abs(fd), 1e-8))
        Pm = bank.matrix.data
        for idx in [(0, 0), (3, 1), (7, 3), (5, 2)]:
            orig = Pm[idx]
            Pm[idx] = orig + eps
            up = f()
            Pm[idx] = orig - eps
            down = f()
            Pm[idx] = orig
            fd = (up - down) / (2 * eps)
            worst = max(worst, abs(fd - g_P[idx]) / max(abs(fd), 1e-8))
        assert worst < 1e-4


class TestNtXent:
    def test_orthogonal_quadruple_closed_form(self):
        # all four embeddings mutually orthogonal, tau=1: every anchor sees
        # positive similarity 0 and two negatives at 0 -> loss = log 3
        z1 = np.eye(4)[:2]
        z2 = np.eye(4)[2:]
        # brute-force oracle over all pair similarities
        def oracle(z1, z2, tau):
            z = np.vstack([z1, z2])
            n = len(z)
            total = 0.0
            for i in range(n):
                pos = (i + n // 2) % n
                logits = [z[i] @ z[j] / tau for j in range(n) if j != i]
                pos_logit = z[i] @ z[pos] / tau
                total += -np.log(np.exp(pos_logit) / np.sum(np.exp(logits)))
            return total / n

        val = nt_xent(z1, z2, 1.0)
        assert val == pytest.approx(oracle(z1, z2, 1.0), abs=1e-12)
        assert val == pytest.approx(np.log(3), abs=1e-12)

    def test_identical_positives_sharp_limit(self):
        z1 = np.eye(4)[:2]
        assert nt_xent(z1, z1.copy(), 0.01) == pytest.approx(0.0, abs=1e-9)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(9)
        z1, z2 = _unit_rows(rng, 3, 5), _unit_rows(rng, 3, 5)
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        assert nt_xent(z1 @ q, z2 @ q, 0.5) == pytest.approx(nt_xent(z1, z2, 0.5), abs=1e-9)

    def test_b1_rejected(self):
        with pytest.raises(ValueError, match="B >= 2"):
            nt_xent(np.ones((1, 4)), np.ones((1, 4)), 0.1)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        z1, z2 = _unit_rows(rng, 4, 8), _unit_rows(rng, 4, 8)
        loss, g1, g2 = nt_xent_with_grad(z1, z2, 0.3)
        eps = 1e-6
        worst = 0.0
        for arr, grad in [(z1, g1), (z2, g2)]:
            for idx in [(0, 0), (1, 5), (3, 7), (2, 2)]:
                orig = arr[idx]
                arr[idx] = orig + eps
                up = nt_xent(z1, z2, 0.3)
                arr[idx] = orig - eps
                down = nt_xent(z1, z2, 0.3)
                arr[idx] = orig
                fd = (up - down) / (2 * eps)
                worst = max(worst, abs(fd - grad[idx]) / max(abs(fd), 1e-8))
        assert worst < 1e-4


class TestClipLoss:
    def test_b1_rejected(self):
        with pytest.raises(ValueError, match="B >= 2"):
            clip_loss(np.ones((1, 4)), np.ones((1, 4)), 0.0)

    def test_identical_matched_rows_low_temperature(self):
        z = np.eye(4)[:3]
        assert clip_loss(z, z.copy(), np.log(0.01)) == pytest.approx(0.0, abs=1e-9)

    def test_consistent_permutation_invariance(self):
        rng = np.random.default_rng(11)
        za, zb = _unit_rows(rng, 5, 6), _unit_rows(rng, 5, 6)
        perm = np.array([4, 2, 0, 3, 1])
        assert clip_loss(za[perm], zb[perm], 0.0) == pytest.approx(
            clip_loss(za, zb, 0.0), abs=1e-12
        )

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        za, zb = _unit_rows(rng, 4, 8), _unit_rows(rng, 4, 8)
        logt = 0.3
        loss, ga, gb, gt = clip_loss_with_grad(za, zb, logt)
        eps = 1e-6
        worst = 0.0
        for arr, grad in [(za, ga), (zb, gb)]:
            for idx in [(0, 0), (1, 5), (3, 7)]:
                orig = arr[idx]
                arr[idx] = orig + eps
                up = clip_loss(za, zb, logt)
                arr[idx] = orig - eps
                down = clip_loss(za, zb, logt)
                arr[idx] = orig
                fd = (up - down) / (2 * eps)
                worst = max(worst, abs(fd - grad[idx]) / max(abs(fd), 1e-8))
        fd = (clip_loss(za, zb, logt + eps) - clip_loss(za, zb, logt - eps)) / (2 * eps)
        worst = max(worst, abs(fd - gt) / max(abs(fd), 1e-8))
        assert worst < 1e-4


class TestSlipLoss:
    def test_decomposition_oracle(self):
        rng = np.random.default_rng(13)
        vp = (_unit_rows(rng, 4, 6), _unit_rows(rng, 4, 6))
        va = (_unit_rows(rng, 4, 6), _unit_rows(rng, 4, 6))
        total = slip_loss(vp, va, nt_temperature=0.1, log_temperature=0.0)
        parts = (
            nt_xent(vp[0], vp[1], 0.1)
            + nt_xent(va[0], va[1], 0.1)
            + clip_loss(vp[0], va[0], 0.0)
        )
        assert total == pytest.approx(parts, abs=1e-12)


class TestGibbsProperty:
    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_ce_lower_bounded_by_entropy(self, seed):
        rng = np.random.default_rng(seed)
        V = _rand_dist(rng, 2, 6)
        U = _rand_dist(rng, 2, 6)
        assert ce_term(V, U) >= ce_term(V, V) - 1e-9


def test_loss_config_validation():
    with pytest.raises(ValueError):
        LossConfig(alpha=1.5)
    with pytest.raises(ValueError):
        LossConfig(objective="focal")
