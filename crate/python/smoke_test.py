"""Smoke test for the pysemshare extension.

Build and expose the module first:

    cargo build -p semshare-py --release
    cp target/release/libpysemshare.so python/pysemshare.so
    python3 python/smoke_test.py
"""

import math
import random

import pysemshare as ps


def main():
    model = ps.SimilarityModel.default()
    lo, hi = model.u_range()
    assert lo <= 4 <= hi
    # similarity rises with SINR at fixed symbols per word
    assert model.similarity(4, 20.0) >= model.similarity(4, -5.0)

    assert ps.hsse(20, 0.95) * 1e6 == ps.hsr(20, 0.95)
    a = ps.bit_equivalent_hsse(10.0, 16) * 16
    b = ps.bit_equivalent_hsse(10.0, 64) * 64
    assert a == b
    assert math.isfinite(ps.v2i_pathloss(100.0))
    assert math.isfinite(ps.v2v_pathloss(50.0, 0.0))

    env = ps.Environment(seed=11)
    obs = env.reset(0)
    assert len(obs) == env.obs_dim
    rng = random.Random(0)
    total, steps, done = 0.0, 0, False
    while not done:
        raw = [rng.uniform(-0.999, 0.999) for _ in range(env.action_dim)]
        obs, reward, done, info = env.step(raw)
        assert len(obs) == env.obs_dim
        assert math.isfinite(reward)
        total += reward
        steps += 1
    print(f"random episode: {steps} steps, mean reward {total / steps:.4f}")

    bad = None
    try:
        ps.Environment(config="[env]\nq = 0\n")
    except ValueError as e:
        bad = str(e)
    assert bad is not None
    print("ok")


if __name__ == "__main__":
    main()
