import unittest

import numpy as np

from pulsemap3d.core.errors import SpanMismatch
from pulsemap3d.core.timeutil import frame_times, overlap_span, resample_uniform


class TestTimeUtil(unittest.TestCase):
    def test_frame_times(self):
        t = frame_times(4, 30.0, t0=100.0)
        np.testing.assert_allclose(t, [100.0, 100.0 + 1 / 30, 100.0 + 2 / 30, 100.1])

    def test_overlap_span(self):
        a = frame_times(300, 30.0, t0=0.0)
        b = frame_times(600, 60.0, t0=2.0)
        start, end = overlap_span(a, b)
        self.assertEqual(start, 2.0)
        self.assertAlmostEqual(end, 299 / 30)

    def test_overlap_too_short(self):
        a = frame_times(300, 30.0)
        b = frame_times(60, 60.0, t0=9.5)
        with self.assertRaises(SpanMismatch):
            overlap_span(a, b, min_overlap_s=5.0)
        with self.assertRaises(SpanMismatch):
            overlap_span(a[:1], b)

    def test_resample_uniform_is_linear(self):
        t = np.array([0.0, 1.0, 2.0])
        values = np.array([0.0, 10.0, 20.0])
        out = resample_uniform(t, values, 4.0, 0.0, 2.0)
        np.testing.assert_allclose(out, np.arange(9) * 2.5)

    def test_resample_sorts_timestamps(self):
        t = np.array([2.0, 0.0, 1.0])
        values = np.array([4.0, 0.0, 2.0])
        np.testing.assert_allclose(resample_uniform(t, values, 2.0, 0.0, 2.0), [0, 1, 2, 3, 4])


if __name__ == "__main__":
    unittest.main()
