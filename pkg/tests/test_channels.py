import unittest

import numpy as np

from decoupler.catalog import channel_from_spec
from decoupler.channels import (
    QuantumChannel,
    adjoint_apply,
    apply,
    channel_from_payload,
    channel_to_payload,
    choi,
    complementary,
    coordinate_projector,
    identity_channel,
    mirror,
    postcompose,
    projector_compression,
    random_channel,
    rename_channel,
    stinespring,
    tensor_channels,
)
from decoupler.tensor import (
    MultipartiteOperator,
    OperatorError,
    SystemLabel,
    maximally_mixed,
    partial_trace,
    permute_systems,
    psd_power,
    random_density,
    random_hermitian,
    random_pure_state,
    schatten_norm,
)

A1 = SystemLabel("A1", 2)
A2 = SystemLabel("A2", 2)
E = SystemLabel("E", 2)
R = SystemLabel("R", 3)


class QuantumChannelTests(unittest.TestCase):
    def test_kraus_shape_is_checked(self):
        with self.assertRaisesRegex(OperatorError, "dimension-mismatch"):
            QuantumChannel((A1,), (E,), np.zeros((1, 3, 2)))

    def test_random_channel_is_trace_preserving(self):
        channel = random_channel((A1, A2), E, 2, seed=3)
        self.assertTrue(channel.tp)
        self.assertTrue(channel.trace_non_increasing)

    def test_random_channel_is_seeded_and_trace_preserving(self):
        for seed in range(50):
            with self.subTest(seed=seed):
                first = random_channel((A1, A2), E, 3, seed=seed)
                second = random_channel((A1, A2), E, 3, seed=seed)
                self.assertTrue(np.array_equal(first.kraus, second.kraus))
                total = sum(k.conj().T @ k for k in first.kraus)
                self.assertTrue(np.allclose(total, np.eye(4), atol=1e-10))

    def test_apply_preserves_trace_and_keeps_rest(self):
        channel = random_channel((A1, A2), E, 2, seed=4)
        rho = random_density((A1, A2, R), seed=5)
        out = apply(channel, rho)
        self.assertEqual(out.names, ("E", "R"))
        self.assertAlmostEqual(out.trace.real, 1.0, places=10)
        self.assertTrue(
            np.allclose(partial_trace(out, ["R"]).entries, partial_trace(rho, ["R"]).entries)
        )

    def test_apply_refuses_output_clash(self):
        channel = random_channel((A1,), R, 1, seed=6)
        with self.assertRaisesRegex(OperatorError, "system-clash"):
            apply(channel, random_density((A1, R), seed=1))

    def test_adjoint_duality(self):
        channel = random_channel((A1, A2), E, 2, seed=7)
        for seed in range(5):
            with self.subTest(seed=seed):
                x = random_hermitian((E,), seed=seed)
                rho = random_density((A1, A2), seed=seed + 50)
                left = np.trace(x.entries @ apply(channel, rho).entries)
                pulled = adjoint_apply(channel, x)
                right = np.trace(pulled.entries @ rho.entries)
                self.assertAlmostEqual(complex(left), complex(right), places=10)

    def test_adjoint_of_trace_preserving_channel_is_unital(self):
        channel = random_channel((A1, A2), E, 2, seed=8)
        pulled = adjoint_apply(channel, MultipartiteOperator((E,), np.eye(2)))
        self.assertTrue(np.allclose(pulled.entries, np.eye(4), atol=1e-10))


class DilationTests(unittest.TestCase):
    def test_stinespring_is_an_isometry(self):
        channel = random_channel((A1, A2), E, 2, seed=9)
        dilation = stinespring(channel, "F")
        matrix = dilation.matrix
        self.assertTrue(np.allclose(matrix.conj().T @ matrix, np.eye(4), atol=1e-10))

    def test_stinespring_reproduces_channel(self):
        channel = random_channel((A1, A2), E, 2, seed=10)
        rho = random_density((A1, A2, R), seed=11)
        full = stinespring(channel, "F").apply(rho)
        self.assertTrue(
            np.allclose(partial_trace(full, ["E", "R"]).entries, apply(channel, rho).entries)
        )

    def test_complementary_matches_environment_marginal(self):
        channel = random_channel((A1, A2), E, 2, seed=12)
        rho = random_density((A1, A2), seed=13)
        full = stinespring(channel, "F").apply(rho)
        env = apply(complementary(channel, "F"), rho)
        self.assertTrue(np.allclose(partial_trace(full, ["F"]).entries, env.entries))

    def test_complement_of_dephasing_measures_and_prepares(self):
        kraus = np.stack([np.diag(row) for row in np.eye(2)])
        dephasing = QuantumChannel((A1,), (E,), kraus)
        for seed in range(5):
            with self.subTest(seed=seed):
                rho = random_density((A1,), seed=seed)
                env = apply(complementary(dephasing, "F"), rho)
                self.assertEqual(env.names, ("F",))
                expected = np.diag(np.diag(rho.entries))
                self.assertTrue(np.allclose(env.entries, expected, atol=1e-12))

    def test_double_complement_keeps_output_spectrum(self):
        channels = [
            random_channel((A1, A2), E, 2, seed=24),
            QuantumChannel((A1,), (E,), np.stack([np.diag(row) for row in np.eye(2)])),
        ]
        for index, channel in enumerate(channels):
            twice = complementary(complementary(channel, "F"), "G")
            for seed in range(3):
                with self.subTest(channel=index, seed=seed):
                    rho = random_density(channel.input_systems, seed=seed)
                    first = np.linalg.eigvalsh(apply(channel, rho).entries)
                    second = np.linalg.eigvalsh(apply(twice, rho).entries)
                    self.assertTrue(np.allclose(first, second, atol=1e-10))

    def test_apply_pure_orders_outputs_environment_then_rest(self):
        channel = random_channel((A1, A2), E, 2, seed=14)
        state = random_pure_state((A1, A2, R), seed=15)
        out = stinespring(channel, "F").apply_pure(state)
        self.assertEqual(out.names, ("E", "F", "R"))

    def test_dilation_requires_trace_preservation(self):
        lossy = QuantumChannel((A1,), (E,), 0.5 * np.eye(2))
        with self.assertRaisesRegex(OperatorError, "not-trace-preserving"):
            stinespring(lossy)


class ChoiTests(unittest.TestCase):
    def test_choi_of_identity_is_maximally_entangled(self):
        channel = identity_channel((A1,))
        state = choi(channel).state
        vector = np.eye(2).reshape(-1) / np.sqrt(2)
        self.assertTrue(np.allclose(state.entries, np.outer(vector, vector)))

    def test_mirror_marginal_is_maximally_mixed(self):
        channel = random_channel((A1, A2), E, 2, seed=16)
        omega = choi(channel)
        marginal = omega.marginal([mirror(A1), mirror(A2)])
        self.assertTrue(np.allclose(marginal.entries, np.eye(4) / 4, atol=1e-10))

    def test_output_marginal_is_channel_on_maximally_mixed(self):
        channel = random_channel((A1, A2), E, 2, seed=17)
        expected = apply(channel, maximally_mixed((A1, A2)))
        self.assertTrue(np.allclose(choi(channel).output_marginal().entries, expected.entries))

    def test_postcompose_scales_outputs(self):
        channel = random_channel((A1,), E, 1, seed=18)
        op = MultipartiteOperator((E,), 2 * np.eye(2))
        scaled = postcompose(channel, op)
        rho = random_density((A1,), seed=19)
        self.assertTrue(np.allclose(apply(scaled, rho).entries, 4 * apply(channel, rho).entries))


class CompositionTests(unittest.TestCase):
    def test_tensor_channels_act_independently(self):
        first = random_channel((A1,), E, 1, seed=20)
        second = rename_channel(first, {"A1": "A2", "E": "E'"})
        joint = tensor_channels(first, second)
        rho = random_density((A1,), seed=21)
        sigma = random_density((A2,), seed=22)
        out = apply(joint, MultipartiteOperator((A1, A2), np.kron(rho.entries, sigma.entries)))
        expected = np.kron(apply(first, rho).entries, apply(second, sigma).entries)
        self.assertTrue(np.allclose(out.entries, expected))

    def test_rename_rejects_unknown_system(self):
        with self.assertRaisesRegex(OperatorError, "unknown-system"):
            rename_channel(identity_channel((A1,)), {"Z": "Y"})


class ProjectorCompressionTests(unittest.TestCase):
    def test_choi_output_marginal_is_maximally_mixed(self):
        dims = [(3, 2), (4, 1), (2, 2)]
        senders = [SystemLabel(f"A{index}", dim) for index, (dim, _) in enumerate(dims, 1)]
        projectors = [
            coordinate_projector(sender, rank) for sender, (_, rank) in zip(senders, dims)
        ]
        channel = projector_compression(projectors)
        marginal = choi(channel).output_marginal()
        side = 2 * 1 * 2
        self.assertTrue(np.allclose(marginal.entries, np.eye(side) / side, atol=1e-10))

    def test_mirror_output_state_is_pure(self):
        sender = SystemLabel("A1", 4)
        channel = projector_compression([coordinate_projector(sender, 2)])
        omega = choi(channel).marginal([mirror(sender), channel.output_system])
        self.assertAlmostEqual(schatten_norm(omega, 2) ** 2, 1.0, places=9)

    def test_tilde_choi_norm_is_compressed_dimension(self):
        sender = SystemLabel("A1", 4)
        channel = projector_compression([coordinate_projector(sender, 2)])
        output = channel.output_system
        omega = permute_systems(
            choi(channel).marginal([mirror(sender), output]), [mirror(sender).name, output.name]
        )
        quarter = psd_power(partial_trace(omega, [output]), -0.25).entries
        weight = np.kron(np.eye(4), quarter)
        tilde = weight @ omega.entries @ weight
        self.assertAlmostEqual(float(np.real(np.trace(tilde @ tilde))), output.dim, places=9)

    def test_rejects_non_projector(self):
        with self.assertRaisesRegex(OperatorError, "not-projector"):
            projector_compression([MultipartiteOperator((A1,), np.diag([0.5, 0.0]))])


class ChannelPayloadTests(unittest.TestCase):
    def test_payload_rebuilds_the_channel(self):
        channel = random_channel((A1, A2), E, 2, seed=23)
        rebuilt = channel_from_payload(channel_to_payload(channel))
        self.assertEqual(rebuilt.input_names, channel.input_names)
        self.assertTrue(np.allclose(rebuilt.kraus, channel.kraus))

    def test_payload_names_default_to_senders_and_e(self):
        payload = {"inputs": [2], "output": 2, "kraus": [[[1, 0], [0, 0], [0, 0], [1, 0]]]}
        channel = channel_from_payload(payload)
        self.assertEqual(channel.input_names, ("A1",))
        self.assertEqual(channel.output_names, ("E",))
        self.assertTrue(channel.tp)

    def test_payload_rejects_wrong_kraus_size(self):
        with self.assertRaisesRegex(OperatorError, "bad-channel"):
            channel_from_payload({"inputs": [2], "output": 2, "kraus": [[[1, 0]]]})

    def test_builtin_depolarizing_has_d_squared_kraus_per_sender(self):
        channel = channel_from_spec({"name": "depolarizing", "dims": [2, 3]})
        self.assertEqual(channel.kraus.shape[0], 4 * 9)
        self.assertTrue(channel.tp)


if __name__ == "__main__":
    unittest.main()
