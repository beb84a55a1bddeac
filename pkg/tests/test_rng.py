import numpy as np

from cuedecomp.rng import as_generator, derive_stream


def test_same_inputs_same_stream():
    a = derive_stream(42, "sample-1").generator.random(100)
    b = derive_stream(42, "sample-1").generator.random(100)
    np.testing.assert_array_equal(a, b)


def test_distinct_keys_distinct_streams():
    a = derive_stream(42, "a").generator.random(50)
    b = derive_stream(42, "b").generator.random(50)
    assert not np.array_equal(a, b)


def test_distinct_seeds_distinct_streams():
    a = derive_stream(1, "k").generator.random(50)
    b = derive_stream(2, "k").generator.random(50)
    assert not np.array_equal(a, b)


def test_draws_roughly_uniform():
    draws = derive_stream(7, "uniformity").generator.random(1_000_000)
    assert abs(draws.mean() - 0.5) < 0.002


def test_spawn_differs_from_parent():
    parent = derive_stream(5, "item")
    child = parent.spawn("sub")
    assert child.item_key == "item|sub"
    a = derive_stream(5, "item").generator.random(20)
    b = child.generator.random(20)
    assert not np.array_equal(a, b)


def test_as_generator_accepts_int_stream_generator():
    assert as_generator(3).random() == as_generator(3).random()
    gen = np.random.default_rng(0)
    assert as_generator(gen) is gen
    stream = derive_stream(0, "x")
    assert as_generator(stream) is stream.generator
