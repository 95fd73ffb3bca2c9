"""Smoke test for the floqmem_py extension module.

Build and install first:

    cd crates/python && maturin develop --release
"""

import json
import math

import floqmem_py as fm


def main():
    print(fm.version())

    e1, e2 = fm.quasienergies(0.0)
    assert abs(e1 - 0.5) < 1e-9 or abs(e1 + 0.5) < 1e-9, (e1, e2)

    xs = fm.crossings(2.0, 5.0)
    assert len(xs) == 2, xs
    assert abs(xs[0] - 2.6756) < 1e-3 and abs(xs[1] - 4.2669) < 1e-3, xs

    re, im = fm.coefficient(2.6756, 1, 0, 0)
    assert 0.25 < math.hypot(re, im) < 0.4

    assert fm.rate(1.0) > fm.rate(-1.0) > 0.0

    times, states = fm.heom_evolve(6.5, [1.0, 0.0, 0.0], 5.0, dt=0.1)
    assert len(times) == len(states) == 51
    assert all(math.sqrt(sum(c * c for c in s)) <= 1.0 + 1e-6 for s in states)

    cfg = json.loads(fm.resolve_config('{"drive": {"Omega": 3.0}}'))
    assert cfg["drive"]["Omega"] == 3.0

    try:
        fm.resolve_config('{"nope": 1}')
    except ValueError:
        pass
    else:
        raise AssertionError("bad config accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
