import unittest

from src.contracts.manifest import StepRecord


class StepRecordTests(unittest.TestCase):
    def test_duration_calculation(self) -> None:
        step = StepRecord(name="solve")
        step.start(at_s=10.0)
        step.finish(status="success", at_s=10.125)

        self.assertEqual(step.duration_ms, 125)
        self.assertEqual(step.attempts, 1)
        self.assertEqual(step.status, "success")

    def test_restart_counts_attempts_and_keeps_meta(self) -> None:
        step = StepRecord(name="verify")
        step.start(at_s=1.0)
        step.finish(status="failed", at_s=1.5, error={"type": "ContractError"}, error_type="ContractError", meta={"trials": 10})
        step.start(at_s=2.0)
        step.finish(status="success", at_s=2.25, meta={"passed": True})

        self.assertEqual(step.attempts, 2)
        self.assertIsNone(step.error)
        self.assertEqual(step.meta, {"trials": 10, "passed": True})
        self.assertEqual(step.duration_ms, 250)

    def test_duration_non_negative(self) -> None:
        step = StepRecord(name="verify", started_at_s=5.0, ended_at_s=4.0)
        self.assertEqual(step.compute_duration_ms(), 0)


if __name__ == "__main__":
    unittest.main()
