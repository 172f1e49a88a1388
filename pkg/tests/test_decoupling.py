import math
import unittest
from collections import Counter

import numpy as np

from decoupler.catalog import channel_from_spec, state_from_spec
from decoupler.channels import coordinate_projector, random_channel
from decoupler.decoupling import (
    DecouplingExperiment,
    buscemi_experiment,
    decoupling_report,
    decoupling_target,
    larger_sender,
    lhs_estimate,
    rhs_buscemi,
    rhs_entropic,
    rhs_k_sender,
    rhs_two_sender,
    tilde_norms,
    tilde_objects,
)
from decoupler.entropy import tilde_h2_cond
from decoupler.tensor import (
    MultipartiteOperator,
    OperatorError,
    SystemLabel,
    maximally_mixed,
    partial_trace,
    random_density,
)
from decoupler.twirl import bit_strings


def _senders(dims):
    return tuple(SystemLabel(f"A{index}", dim) for index, dim in enumerate(dims, start=1))


def _random_experiment(dims, delta, seed, samples=100):
    senders = _senders(dims)
    channel = random_channel(senders, SystemLabel("E", 2), 2 * math.prod(dims), seed=seed)
    rho = random_density(senders + (SystemLabel("R", 2),), seed=seed + 1000)
    return DecouplingExperiment(channel, rho, delta, samples, seed)


class DecouplingExperimentTests(unittest.TestCase):
    def test_input_must_be_a_density(self):
        channel = channel_from_spec("identity")
        senders = channel.input_systems
        with self.assertRaisesRegex(OperatorError, "not-density"):
            DecouplingExperiment(channel, MultipartiteOperator(senders, np.eye(4)))

    def test_outputs_cannot_reuse_reference_names(self):
        channel = channel_from_spec({"name": "identity", "output": "R"})
        rho = state_from_spec("max-entangled", channel.input_systems)
        with self.assertRaisesRegex(OperatorError, "system-clash"):
            DecouplingExperiment(channel, rho)

    def test_sender_dimensions_must_match(self):
        channel = channel_from_spec({"name": "identity", "dims": [2, 3]})
        rho = state_from_spec("max-entangled", _senders((2, 2)))
        with self.assertRaisesRegex(OperatorError, "dimension-mismatch"):
            DecouplingExperiment(channel, rho)

    def test_reference_is_everything_but_the_senders(self):
        experiment = _random_experiment((2, 2), 0.0, seed=1)
        self.assertEqual([system.name for system in experiment.reference], ["R"])
        self.assertEqual(experiment.dims, (2, 2))

    def test_larger_sender_breaks_ties_towards_the_second(self):
        self.assertEqual(larger_sender(_random_experiment((2, 2), 0.0, seed=2)).name, "A2")
        self.assertEqual(larger_sender(_random_experiment((3, 2), 0.0, seed=2)).name, "A1")


class LeftHandSideTests(unittest.TestCase):
    def test_completely_depolarizing_channel_decouples_exactly(self):
        channel = channel_from_spec({"name": "depolarizing", "p": 1.0})
        rho = state_from_spec("max-entangled", channel.input_systems)
        estimate = lhs_estimate(DecouplingExperiment(channel, rho, samples=20, seed=3))
        self.assertLess(estimate.mean, 1e-9)

    def test_identity_channel_keeps_full_correlation(self):
        channel = channel_from_spec("identity")
        rho = state_from_spec("max-entangled", channel.input_systems)
        estimate = lhs_estimate(DecouplingExperiment(channel, rho, samples=10, seed=4))
        self.assertAlmostEqual(estimate.mean, 2 - 2 / 16, places=9)
        self.assertLess(estimate.stderr, 1e-9)

    def test_target_is_channel_marginal_times_reference(self):
        experiment = _random_experiment((2, 2), 0.0, seed=5)
        target = decoupling_target(experiment)
        self.assertEqual(target.names, ("E", "R"))
        self.assertTrue(
            np.allclose(
                partial_trace(target, ["R"]).entries,
                partial_trace(experiment.input, ["R"]).entries,
            )
        )

    def test_needs_two_samples_for_standard_error(self):
        experiment = _random_experiment((2, 2), 0.0, seed=6, samples=1)
        with self.assertRaisesRegex(OperatorError, "bad-samples"):
            lhs_estimate(experiment)

    def test_estimate_is_seeded_and_worker_independent(self):
        experiment = _random_experiment((2, 2), 0.0, seed=7, samples=70)
        diagnostics = Counter()
        first = lhs_estimate(experiment, max_workers=1)
        second = lhs_estimate(experiment, max_workers=3, diagnostics=diagnostics)
        self.assertEqual(first, second)
        self.assertEqual(diagnostics["chunks"], 2)


class TildeNormTests(unittest.TestCase):
    def test_norms_are_exponentiated_entropies_without_truncation(self):
        experiment = _random_experiment((2, 3), 0.0, seed=8)
        norms = tilde_norms(experiment)
        for bits in bit_strings(2)[1:]:
            chosen = [s for s, bit in zip(experiment.senders, bits) if bit == "1"]
            marginal = partial_trace(experiment.input, chosen + ["R"])
            expected = 2.0 ** -tilde_h2_cond(marginal, ["R"], 0.0).value
            self.assertAlmostEqual(norms.rho[bits], expected, places=9)

    def test_tilde_objects_weight_by_truncated_marginals(self):
        experiment = _random_experiment((2, 2), 0.1, seed=10)
        triple = tilde_objects(experiment)
        self.assertLessEqual(triple.zeta_R.trace.real, 1.0 + 1e-12)
        self.assertGreaterEqual(triple.zeta_R.trace.real, 0.9 - 1e-12)
        self.assertEqual(triple.tilde_rho.names, experiment.input.names)
        self.assertEqual(triple.tilde_channel.output_names, ("E",))

    def test_reference_norm_is_its_rank(self):
        experiment = _random_experiment((2, 2), 0.0, seed=9)
        self.assertAlmostEqual(tilde_norms(experiment).rho["00"], 2.0, places=9)

    def test_entropic_bound_dominates_squared_two_sender_bound(self):
        for seed in range(5):
            with self.subTest(seed=seed):
                experiment = _random_experiment((2, 2), 0.0, seed=seed)
                self.assertGreaterEqual(
                    rhs_entropic(experiment) + 1e-12, rhs_two_sender(experiment) ** 2
                )


class DecouplingInequalityTests(unittest.TestCase):
    def test_sampled_lhs_stays_below_bounds(self):
        cases = [
            (dims, delta, seed)
            for dims in [(2, 2), (2, 3), (2, 2, 2)]
            for delta in (0.0, 0.02, 0.1)
            for seed in range(4)
        ]
        for dims, delta, seed in cases:
            with self.subTest(dims=dims, delta=delta, seed=seed):
                experiment = _random_experiment(dims, delta, seed=seed)
                estimate = lhs_estimate(experiment)
                self.assertLessEqual(estimate.mean, 2.0 + 1e-9)
                bound = rhs_k_sender(experiment).one_norm
                if len(dims) == 2:
                    bound = min(bound, rhs_two_sender(experiment, include_residual=True))
                self.assertLessEqual(estimate.mean, bound + 3 * estimate.stderr)

    def test_two_sender_bound_needs_two_senders(self):
        experiment = _random_experiment((2, 2, 2), 0.0, seed=1)
        with self.assertRaisesRegex(OperatorError, "sender-count"):
            rhs_two_sender(experiment)

    def test_residual_only_increases_the_bound(self):
        experiment = _random_experiment((2, 3), 0.02, seed=2)
        self.assertGreater(
            rhs_two_sender(experiment, include_residual=True), rhs_two_sender(experiment)
        )

    def test_k_sender_bound_is_looser_for_two_senders(self):
        for seed in range(5):
            with self.subTest(seed=seed):
                experiment = _random_experiment((2, 3), 0.02, seed=seed)
                self.assertGreaterEqual(
                    rhs_k_sender(experiment).one_norm, rhs_two_sender(experiment)
                )

    def test_k_sender_one_norm_form(self):
        experiment = _random_experiment((2, 2, 2), 0.1, seed=3)
        bound = rhs_k_sender(experiment)
        self.assertAlmostEqual(bound.one_norm, math.sqrt(0.1 + bound.squared))

    def test_k_sender_one_norm_is_root_of_squared_without_truncation(self):
        experiment = _random_experiment((2, 2, 2), 0.0, seed=3)
        bound = rhs_k_sender(experiment)
        self.assertEqual(bound.one_norm, math.sqrt(bound.squared))

    def test_bounds_need_nontrivial_senders(self):
        experiment = _random_experiment((1, 2), 0.0, seed=4)
        with self.assertRaisesRegex(OperatorError, "sender-dimension"):
            rhs_k_sender(experiment)


class ProjectorCompressionBoundTests(unittest.TestCase):
    def _setup(self, seed):
        senders = _senders((3, 4))
        projectors = [coordinate_projector(senders[0], 2), coordinate_projector(senders[1], 1)]
        rho = random_density(senders + (SystemLabel("R", 2),), seed=seed)
        return projectors, rho

    def test_output_norms_are_compressed_dimensions(self):
        projectors, rho = self._setup(1)
        experiment = buscemi_experiment(projectors, rho)
        norms = tilde_norms(experiment)
        expected = {"00": 1.0, "01": 1.0, "10": 2.0, "11": 2.0}
        for bits, value in expected.items():
            self.assertAlmostEqual(norms.omega[bits], value, delta=1e-9)

    def test_target_output_is_maximally_mixed(self):
        projectors, rho = self._setup(2)
        target = decoupling_target(buscemi_experiment(projectors, rho))
        expected = np.kron(np.eye(2) / 2, np.eye(1))
        self.assertTrue(
            np.allclose(partial_trace(target, ["E1", "E2"]).entries, expected, atol=1e-10)
        )

    def test_closed_form_matches_general_entropic_bound(self):
        for delta in (0.0, 0.02):
            with self.subTest(delta=delta):
                projectors, rho = self._setup(3)
                experiment = buscemi_experiment(projectors, rho, delta)
                self.assertAlmostEqual(
                    rhs_buscemi(projectors, rho, delta) ** 2,
                    rhs_entropic(experiment),
                    places=9,
                )

    def test_sampled_lhs_stays_below_closed_form(self):
        projectors, rho = self._setup(4)
        experiment = buscemi_experiment(projectors, rho, 0.0, samples=100, seed=5)
        estimate = lhs_estimate(experiment)
        self.assertLessEqual(
            estimate.mean, rhs_buscemi(projectors, rho, 0.0) + 3 * estimate.stderr
        )


class DecouplingReportTests(unittest.TestCase):
    def test_two_sender_report_fields(self):
        report = decoupling_report(_random_experiment((2, 2), 0.02, seed=6, samples=50))
        for key in ("lhs_mean", "lhs_stderr", "rhs_thm1", "rhs_thm3", "rhs_cor1", "per_term_norms"):
            self.assertIsNotNone(report[key], key)
        self.assertEqual(report["k"], 2)
        self.assertEqual(report["larger_sender"], "A2")
        self.assertTrue(report["within_bound"])
        self.assertEqual(report["diagnostics"]["samples"], 50)

    def test_checked_bound_is_capped_at_two(self):
        channel = channel_from_spec("identity")
        rho = state_from_spec("max-entangled", channel.input_systems)
        report = decoupling_report(DecouplingExperiment(channel, rho, samples=10, seed=4))
        uncapped = min(report["rhs_thm1_with_residual"], report["rhs_thm3"])
        self.assertGreater(uncapped, 2.0)
        self.assertEqual(report["rhs_capped"], 2.0)
        self.assertTrue(report["within_bound"])

    def test_three_sender_report_leaves_two_sender_bound_empty(self):
        report = decoupling_report(_random_experiment((2, 2, 2), 0.0, seed=7, samples=20))
        self.assertIsNone(report["rhs_thm1"])
        self.assertIsNotNone(report["rhs_thm3"])

    def test_trivial_sender_skips_bounds(self):
        report = decoupling_report(_random_experiment((1, 2), 0.0, seed=8, samples=10))
        self.assertIsNone(report["rhs_thm3"])
        self.assertEqual(report["diagnostics"]["boundsSkippedSenderDimension"], 1)
        self.assertNotIn("within_bound", report)

    def test_maximally_mixed_input_has_trivial_reference(self):
        channel = channel_from_spec("depolarizing")
        rho = state_from_spec("maximally-mixed", channel.input_systems)
        self.assertTrue(
            np.allclose(rho.entries, maximally_mixed(rho.systems).entries)
        )
        report = decoupling_report(DecouplingExperiment(channel, rho, samples=10, seed=1))
        self.assertLess(report["lhs_mean"], 1e-9)


if __name__ == "__main__":
    unittest.main()
