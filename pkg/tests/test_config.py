import json
import tempfile
import unittest
from pathlib import Path

from decoupler.config import (
    CONFIG_DIR_ENV,
    DEFAULT_OUT_DIR,
    OUT_DIR_ENV,
    ConfigError,
    load_config,
    parse_config,
)


class ParseConfigTests(unittest.TestCase):
    def test_defaults_per_mode(self):
        twirl = parse_config({"mode": "twirl-check", "dims": [2, 2]}, environ={})
        self.assertEqual(twirl.samples, 10000)
        self.assertEqual(twirl.dims, (2, 2))
        decouple = parse_config(
            {"mode": "decouple", "channel": "identity", "state": "max-entangled"}, environ={}
        )
        self.assertEqual(decouple.samples, 1000)
        self.assertEqual(decouple.delta, 0.0)
        self.assertEqual(decouple.out_dir, Path(DEFAULT_OUT_DIR))

    def test_out_dir_comes_from_environment(self):
        config = parse_config(
            {"mode": "entropy", "state": "random"}, environ={OUT_DIR_ENV: "/tmp/reports"}
        )
        self.assertEqual(config.out_dir, Path("/tmp/reports"))

    def test_mode_must_be_known(self):
        with self.assertRaisesRegex(ConfigError, "'mode'"):
            parse_config({"mode": "teleport"}, environ={})
        with self.assertRaisesRegex(ConfigError, "JSON object"):
            parse_config([], environ={})

    def test_required_fields_are_named(self):
        cases = [
            ({"mode": "decouple", "channel": "identity"}, "'state'"),
            ({"mode": "rate-region"}, "'channel'"),
            ({"mode": "ent-gen", "channel": "identity"}, "'epsilon'"),
            ({"mode": "entropy"}, "'state'"),
        ]
        for raw, field in cases:
            with self.subTest(mode=raw["mode"]):
                with self.assertRaisesRegex(ConfigError, field):
                    parse_config(raw, environ={})

    def test_unused_fields_are_rejected(self):
        with self.assertRaisesRegex(ConfigError, r"\['epsilon'\] are not used by mode 'entropy'"):
            parse_config({"mode": "entropy", "state": "random", "epsilon": 0.1}, environ={})

    def test_twirl_check_rejects_delta(self):
        with self.assertRaisesRegex(ConfigError, r"\['delta'\] are not used by mode 'twirl-check'"):
            parse_config({"mode": "twirl-check", "dims": [2], "delta": 0.1}, environ={})

    def test_ranges_name_the_field(self):
        base = {"mode": "ent-gen", "channel": "identity", "epsilon": 0.1}
        cases = [
            ({"delta": 1.0}, "'delta'"),
            ({"delta": -0.1}, "'delta'"),
            ({"epsilon": 0.0}, "'epsilon'"),
            ({"epsilon": 1.5}, "'epsilon'"),
            ({"delta": "small"}, "'delta' must be a number"),
        ]
        for change, field in cases:
            with self.subTest(change=change):
                with self.assertRaisesRegex(ConfigError, field):
                    parse_config({**base, **change}, environ={})

    def test_integers_reject_booleans_and_small_values(self):
        base = {"mode": "decouple", "channel": "identity", "state": "max-entangled"}
        for change, field in [({"samples": 1}, "'samples'"), ({"seed": True}, "'seed'")]:
            with self.subTest(change=change):
                with self.assertRaisesRegex(ConfigError, field):
                    parse_config({**base, **change}, environ={})

    def test_twirl_sender_count(self):
        config = parse_config({"mode": "twirl-check", "k": 3}, environ={})
        self.assertEqual(config.dims, (2, 2, 2))
        with self.assertRaisesRegex(ConfigError, "'k' is 3"):
            parse_config({"mode": "twirl-check", "k": 3, "dims": [2, 2]}, environ={})
        with self.assertRaisesRegex(ConfigError, "'dims' is required"):
            parse_config({"mode": "twirl-check"}, environ={})

    def test_unknown_builtin_suggests_a_name(self):
        raw = {"mode": "rate-region", "channel": "depolarising"}
        with self.assertRaisesRegex(ConfigError, "did you mean depolarizing"):
            parse_config(raw, environ={})

    def test_erasure_channel_accepts_both_names(self):
        for name in ("erasure-to-E", "erasure"):
            with self.subTest(name=name):
                config = parse_config({"mode": "rate-region", "channel": name}, environ={})
                self.assertEqual(config.channel, name)

    def test_inline_payloads_skip_builtin_lookup(self):
        raw = {
            "mode": "decouple",
            "channel": {"inputs": [2], "output": 2, "kraus": [[[1, 0], [0, 0], [0, 0], [1, 0]]]},
            "state": {"name": "random", "seed": 1},
        }
        config = parse_config(raw, environ={})
        self.assertIn("kraus", config.channel)

    def test_overrides_are_validated(self):
        config = parse_config({"mode": "entropy", "state": "random"}, environ={})
        updated = config.with_overrides(seed=4, out_dir="reports")
        self.assertEqual(updated.seed, 4)
        self.assertEqual(updated.out_dir, Path("reports"))
        with self.assertRaisesRegex(ConfigError, "'samples'"):
            config.with_overrides(samples=1)


class LoadConfigTests(unittest.TestCase):
    def _write(self, directory, name, payload):
        path = Path(directory) / name
        path.write_text(json.dumps(payload) if not isinstance(payload, str) else payload, encoding="utf-8")
        return path

    def test_command_fills_missing_mode(self):
        with tempfile.TemporaryDirectory() as directory:
            path = self._write(directory, "entropy.json", {"state": "random"})
            self.assertEqual(load_config(path, {}, mode="entropy").mode, "entropy")

    def test_mode_must_match_command(self):
        with tempfile.TemporaryDirectory() as directory:
            path = self._write(directory, "entropy.json", {"mode": "entropy", "state": "random"})
            with self.assertRaisesRegex(ConfigError, "but the command is 'decouple'"):
                load_config(path, {}, mode="decouple")

    def test_file_errors(self):
        with tempfile.TemporaryDirectory() as directory:
            with self.assertRaisesRegex(ConfigError, "does not exist"):
                load_config(Path(directory) / "missing.json", {})
            broken = self._write(directory, "broken.json", "{not json")
            with self.assertRaisesRegex(ConfigError, "not valid JSON"):
                load_config(broken, {})

    def test_relative_paths_fall_back_to_config_dir(self):
        with tempfile.TemporaryDirectory() as directory:
            self._write(directory, "only-here.json", {"mode": "entropy", "state": "random"})
            config = load_config("only-here.json", {CONFIG_DIR_ENV: directory})
            self.assertEqual(config.mode, "entropy")


if __name__ == "__main__":
    unittest.main()
