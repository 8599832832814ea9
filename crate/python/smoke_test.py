"""Smoke test for the pydeconfound extension module.

Build and run from the workspace root:

    cargo build --release -p deconfound-py
    cp target/release/libpydeconfound.so python/pydeconfound.so
    python3 python/smoke_test.py
"""

import math

import pydeconfound as dc


def main():
    assert dc.lambda_schedule(0, 1.0, 1) == 0.0
    assert abs(dc.lambda_schedule(1000, 1.0, 1) - 1.0) < 1e-12
    assert dc.pehe([1.0, 2.0], [1.0, 2.0]) == 0.0

    data = dc.generate(n=400, confounders=10, seed=3)
    assert len(data["x"]) == 400 and len(data["x"][0]) == 25
    assert data["label"] == "w5-c10-o5-400"
    assert set(data["t"]) <= {0.0, 1.0}
    cate = [b - a for a, b in zip(data["mu0"], data["mu1"])]

    for name in ["tarnet", "snet+", "dragonnet_tr+"]:
        est = dc.Estimator(name, seed=1, max_epochs=5, lr=1e-3)
        assert not est.is_fitted
        try:
            est.predict_cate(data["x"])
        except ValueError:
            pass
        else:
            raise AssertionError("predict before fit should fail")
        report = est.fit(data["x"], data["t"], data["y"])
        assert report["epochs_run"] == 5 and len(report["val_loss"]) == 5
        mu0, mu1, pi = est.predict(data["x"])
        assert len(mu0) == len(mu1) == 400
        assert (pi is None) == (name == "tarnet")
        score = dc.pehe(est.predict_cate(data["x"]), cate)
        assert math.isfinite(score)
        print(f"{est!r}: {est.num_parameters()} parameters, pehe {score:.3f}")

    try:
        dc.Estimator("tarnet+")
    except ValueError as e:
        print(f"rejected: {e}")
    else:
        raise AssertionError("tarnet+ should be rejected")
    print("ok")


if __name__ == "__main__":
    main()
