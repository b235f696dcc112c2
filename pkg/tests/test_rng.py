#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np

from utils.rng import STREAM_EVAL, STREAM_TRAIN, make_rng


class TestRng:
    def test_streams_are_reproducible_and_distinct(self):
        a = make_rng(1, STREAM_EVAL, 5, 0).normal(size=4)
        np.testing.assert_array_equal(a, make_rng(1, STREAM_EVAL, 5, 0).normal(size=4))
        assert not np.array_equal(a, make_rng(1, STREAM_EVAL, 5, 1).normal(size=4))
        assert not np.array_equal(a, make_rng(2, STREAM_EVAL, 5, 0).normal(size=4))
        assert not np.array_equal(make_rng(1, STREAM_TRAIN).normal(size=4), make_rng(1).normal(size=4))
