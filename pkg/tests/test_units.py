import unittest

from pulsemap3d.core.units import bpm_to_hz, from_hz, hz_to_bpm, to_hz


class TestUnits(unittest.TestCase):
    def test_bpm(self):
        self.assertAlmostEqual(to_hz(72.0, "BPM"), 1.2)
        self.assertAlmostEqual(from_hz(1.2, "BPM"), 72.0)

    def test_hz_is_identity(self):
        self.assertEqual(to_hz(1.5, "Hz"), 1.5)
        self.assertEqual(from_hz(1.5, "Hz"), 1.5)

    def test_shortcuts_round_trip(self):
        for bpm in (30.0, 48.0, 110.0, 200.0):
            self.assertAlmostEqual(hz_to_bpm(bpm_to_hz(bpm)), bpm)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            to_hz(1.0, "rpm")  # type: ignore[arg-type]
        with self.assertRaises(ValueError):
            from_hz(1.0, "kHz")  # type: ignore[arg-type]


if __name__ == "__main__":
    unittest.main()
