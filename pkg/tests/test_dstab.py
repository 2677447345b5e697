"""Witness assembly, scale-gain matching and randomized falsification."""

import numpy as np
import pytest

from nsdstab import (
    MixingMatrix,
    PartitionedGain,
    SamplerConfig,
    ScalingDiagonal,
    apply_scaling,
    assemble_witness,
    certify_individual_vl,
    collect_certificates,
    falsify,
    falsify_scan,
    full_certify,
    match_ek,
)
from nsdstab.dstab import (
    VERDICT_CERTIFIED,
    VERDICT_INCONCLUSIVE,
    VERDICT_REFUTED,
)
from nsdstab.vl import VlCertificate
from nsdstab.weights import WeightSystem

from helpers import certified_gain, random_mixing, random_positive_scaling


def identity_gain():
    return PartitionedGain([[1, 1, 0, 0], [0, 0, 1, 1]], (2, 2))


class TestAssembleWitness:
    def test_identity_blocks_uniform_weights(self):
        gain = identity_gain()
        certs = collect_certificates(certify_individual_vl(gain))
        ws = WeightSystem((2, 2), np.ones(4), 1.0)
        witness = assemble_witness(gain, certs, ws)
        # four identity selections, each certified by diag(1/2, 1/2)
        assert np.allclose(witness.d_sum, [[2, 0], [0, 2]])
        assert witness.lyapunov_margin == pytest.approx(4.0)
        assert np.allclose(sorted(witness.spectrum.real), [2, 2])
        assert np.allclose(witness.spectrum.imag, 0)

    def test_single_selection_square_case(self):
        gain = PartitionedGain([[2.0, 0.3], [0.1, 1.5]], (1, 1))
        certs = collect_certificates(certify_individual_vl(gain))
        ws = WeightSystem((1, 1), np.array([3.0]), 3.0)
        witness = assemble_witness(gain, certs, ws)
        d = certs[next(iter(certs))].diagonal
        assert np.allclose(witness.d_sum, 3.0 * gain.entries * d)

    def test_random_certified_instance(self):
        rng = np.random.default_rng(41)
        gain = certified_gain(rng, (3, 2, 3))
        certs = collect_certificates(certify_individual_vl(gain))
        gammas = np.exp(rng.uniform(-1, 1, size=18))
        ws = WeightSystem((3, 2, 3), gammas, 1.0)
        witness = assemble_witness(gain, certs, ws)
        assert witness.lyapunov_margin > 0
        assert (witness.spectrum.real > 0).all()
        # cross-check the spectrum against the characteristic polynomial roots
        coeffs = np.poly(witness.d_sum)
        roots = np.roots(coeffs)
        assert np.allclose(
            np.sort_complex(roots), np.sort_complex(witness.spectrum), rtol=1e-8
        )

    def test_missing_certificate_rejected(self):
        gain = identity_gain()
        certs = collect_certificates(certify_individual_vl(gain))
        incomplete = dict(list(certs.items())[:-1])
        ws = WeightSystem((2, 2), np.ones(4), 1.0)
        with pytest.raises(ValueError):
            assemble_witness(gain, incomplete, ws)

    def test_invalid_certificate_rejected(self):
        gain = PartitionedGain([[0.0, 1.0], [-1.0, 0.0]], (1, 1))
        sel = next(iter(certify_individual_vl(identity_gain())))
        del sel
        from nsdstab.squared import SquaredSelection

        bad = {SquaredSelection((1, 2), (1, 1)): VlCertificate(np.array([1.0, 1.0]), 1.0)}
        ws = WeightSystem((1, 1), np.ones(1), 1.0)
        with pytest.raises(ValueError):
            assemble_witness(gain, bad, ws)


class TestMatchEk:
    def test_uniform_scaling_uniform_certificates(self):
        gain = identity_gain()
        certs = collect_certificates(certify_individual_vl(gain))
        scaling = ScalingDiagonal.ones((2, 2))
        mixing = MixingMatrix.ones((2, 2))
        ws, witness, col_scales = match_ek(gain, certs, scaling, mixing)
        assert np.allclose(ws.gammas, 1.0)
        product, _ = apply_scaling(gain, scaling, mixing)
        assert np.allclose(witness.d_sum, product * col_scales[None, :])
        # N / p_j selections contribute weight 1 * diagonal 1/2 to column j
        assert np.allclose(col_scales, [1.0, 1.0])

    def test_global_scaling_homogeneity(self):
        rng = np.random.default_rng(42)
        gain = certified_gain(rng, (2, 2))
        certs = collect_certificates(certify_individual_vl(gain))
        mixing = random_mixing(rng, (2, 2))
        scaling = random_positive_scaling(rng, (2, 2))
        ws1, _, c1 = match_ek(gain, certs, scaling, mixing)
        doubled = ScalingDiagonal(tuple(2.0 * row for row in scaling.epsilons))
        ws2, _, c2 = match_ek(gain, certs, doubled, mixing)
        assert np.allclose(ws1.gammas, ws2.gammas, rtol=1e-12)
        assert np.allclose(c2, c1 / 2.0, rtol=1e-12)

    def test_columnwise_parallelism_random_instance(self):
        rng = np.random.default_rng(43)
        gain = certified_gain(rng, (3, 2, 3))
        certs = collect_certificates(certify_individual_vl(gain))
        for _ in range(5):
            scaling = random_positive_scaling(rng, (3, 2, 3))
            mixing = random_mixing(rng, (3, 2, 3))
            ws, witness, col_scales = match_ek(gain, certs, scaling, mixing)
            product, _ = apply_scaling(gain, scaling, mixing)
            for j in range(3):
                # independent least-squares factor per column
                factor = float(
                    product[:, j] @ witness.d_sum[:, j] / (product[:, j] @ product[:, j])
                )
                assert factor == pytest.approx(col_scales[j], rel=1e-9)
                residual = witness.d_sum[:, j] - col_scales[j] * product[:, j]
                assert np.linalg.norm(residual) <= 1e-9 * np.linalg.norm(
                    witness.d_sum[:, j]
                )
            assert (col_scales > 0).all()

    def test_zero_product_rejected(self):
        gain = identity_gain()
        certs = collect_certificates(certify_individual_vl(gain))
        scaling = ScalingDiagonal.from_vector((2, 2), [1.0, 0.0, 1.0, 1.0])
        with pytest.raises(ValueError, match="strictly positive"):
            match_ek(gain, certs, scaling, MixingMatrix.ones((2, 2)))


class TestFalsify:
    def test_identity_blocks_clean(self):
        outcome = falsify_scan(identity_gain(), sampler=SamplerConfig(count=10_000))
        assert outcome.counterexample is None
        assert outcome.checked == 10_000
        assert outcome.marginal_count == 0

    def test_negative_selection_found_by_reduction(self):
        gain = PartitionedGain([[1.0, -1.0]], (2,))
        ce = falsify(gain, sampler=SamplerConfig(count=1000))
        assert ce is not None
        assert ce.active.blocks == (1,)
        assert ce.offending_eigenvalue.real < 0
        # reproducible from the stored scaling
        reduced, active = apply_scaling(
            gain, ce.scaling, MixingMatrix.ones((2,))
        )
        assert active.blocks == ce.active.blocks
        eigs = np.linalg.eigvals(reduced)
        assert eigs.real.min() == pytest.approx(ce.offending_eigenvalue.real)

    def test_rotation_boundary_spectrum(self):
        gain = PartitionedGain([[0.0, 1.0], [-1.0, 0.0]], (1, 1))
        # strict threshold: purely imaginary spectra are violations
        ce = falsify(gain, sampler=SamplerConfig(count=200), tol=0.0)
        assert ce is not None
        eps = ce.scaling.as_vector()
        expected = np.sqrt(eps[0] * eps[1])
        assert ce.offending_eigenvalue.real == pytest.approx(0.0, abs=1e-12)
        assert abs(ce.offending_eigenvalue.imag) == pytest.approx(expected, rel=1e-9)
        # default threshold: the same spectra count as marginal, not violating
        outcome = falsify_scan(gain, sampler=SamplerConfig(count=200))
        assert outcome.counterexample is None
        assert outcome.marginal_count > 0

    def test_deterministic_under_seed(self):
        gain = PartitionedGain([[1.0, -1.0]], (2,))
        first = falsify(gain, sampler=SamplerConfig(count=500, seed=7))
        second = falsify(gain, sampler=SamplerConfig(count=500, seed=7))
        assert first.sample_index == second.sample_index
        assert np.array_equal(first.scaling.as_vector(), second.scaling.as_vector())

    def test_smallest_index_returned(self):
        gain = PartitionedGain([[-1.0, -1.0]], (2,))
        ce = falsify(gain, sampler=SamplerConfig(count=50, zero_probability=0.0))
        assert ce.sample_index == 0


class TestFullCertify:
    def test_identity_blocks_certified(self):
        report = full_certify(identity_gain(), sampler=SamplerConfig(count=2000))
        assert report.verdict == VERDICT_CERTIFIED
        assert not report.theorem_conflict
        assert len(report.witnesses) == 5
        for w in report.witnesses:
            assert w["lyapunov_margin"] > 0
            assert all(z.real > 0 for z in w["spectrum"])

    def test_uncertified_without_counterexample_is_inconclusive(self):
        # [[1, 1], [0, 0]] pins its certificate optimum at zero (never
        # certified) yet every sampled product keeps its spectrum in the
        # closed right half-plane, so the default run stays inconclusive
        gain = PartitionedGain([[1.0, 1.0], [0.0, 0.0]], (1, 1))
        report = full_certify(gain, sampler=SamplerConfig(count=500))
        assert report.verdict == VERDICT_INCONCLUSIVE
        assert report.falsification.counterexample is None

    def test_negative_diagonal_refuted(self):
        gain = PartitionedGain([[1.0, -1.0]], (2,))
        report = full_certify(gain, sampler=SamplerConfig(count=2000))
        assert report.verdict == VERDICT_REFUTED
        assert report.falsification.counterexample is not None

    def test_theorem_consistency_on_certified_instances(self):
        rng = np.random.default_rng(44)
        for _ in range(3):
            gain = certified_gain(rng, (2, 1, 2))
            report = full_certify(gain, sampler=SamplerConfig(count=3000))
            assert report.verdict == VERDICT_CERTIFIED
            assert not report.theorem_conflict
