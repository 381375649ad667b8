"""Integer arithmetic helpers."""
import functools


def add(a, b):
    return a + b


def mul(a, b):
    return a * b


def power(base, exp):
    """Raise base to a non-negative integer power."""
    result = 1
    for _ in range(exp):
        result = mul(result, base)
    return result


@functools.lru_cache(maxsize=None)
def square(x):
    return mul(x, x)


def absolute(x):
    if x < 0:
        return -x
    return x
