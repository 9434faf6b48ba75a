from __future__ import annotations

import unittest
from pathlib import Path

import pytest

from src.contracts.errors import ContractError
from src.contracts.manifest import Manifest
from src.pipeline.io import persist_manifest, read_json_file


class ManifestTests(unittest.TestCase):
    def test_from_dict_rejects_unknown_artifact_fields(self) -> None:
        with self.assertRaises(ContractError):
            Manifest.from_dict({"artifacts": {"normalized_audio_path": "x"}})

    def test_from_dict_fills_step_names_and_durations(self) -> None:
        m = Manifest.from_dict({"steps": {"solve": {"status": "success", "started_at_s": 1.0, "ended_at_s": 1.25}}})
        self.assertEqual(m.steps["solve"].name, "solve")
        self.assertEqual(m.steps["solve"].duration_ms, 250)


def test_manifest_roundtrip(tmp_path: Path) -> None:
    manifest_path = tmp_path / "manifest.json"

    m = Manifest(command="solve", run_id="abc", seed=4, problem_sha256="1" * 64)
    m.artifacts.problem_path = "problem.json"
    m.artifacts.method = "first_price_uniform"
    m.artifacts.cut_points = [0.567143]
    m.ensure_step("solve").status = "success"
    persist_manifest(m, manifest_path)

    m2 = Manifest.read_json(manifest_path)
    assert m2.command == "solve"
    assert m2.run_id == "abc"
    assert m2.seed == 4
    assert m2.artifacts.problem_path == "problem.json"
    assert m2.artifacts.cut_points == [pytest.approx(0.567143)]
    assert m2.steps["solve"].status == "success"
    assert m2.steps["solve"].name == "solve"
    assert m2.created_at_s is not None


def test_persist_manifest_is_sorted_json(tmp_path: Path) -> None:
    manifest_path = tmp_path / "nested" / "manifest.json"
    m = Manifest(command="verify")
    persist_manifest(m, manifest_path)

    data = read_json_file(manifest_path)
    assert data["command"] == "verify"
    assert data["updated_at_s"] is not None
    assert list(data) == sorted(data)
    assert not list(manifest_path.parent.glob("*.tmp"))
