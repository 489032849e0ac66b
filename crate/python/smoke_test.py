#!/usr/bin/env python3
"""Smoke test for the vcam_py extension module.

Builds nothing itself: run `cargo build -p vcam-py` first, then
`python3 python/smoke_test.py`. The script links the built cdylib into a
temporary directory under the importable name and exercises the bindings.
"""

import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_vcam_py():
    candidates = [
        os.path.join(ROOT, "target", profile, name)
        for profile in ("debug", "release")
        for name in ("libvcam_py.so", "libvcam_py.dylib", "vcam_py.dll")
    ]
    built = next((p for p in candidates if os.path.exists(p)), None)
    if built is None:
        sys.exit("vcam_py cdylib not found — run `cargo build -p vcam-py` first")
    stage = tempfile.mkdtemp(prefix="vcam_py_")
    shutil.copy(built, os.path.join(stage, "vcam_py.so"))
    sys.path.insert(0, stage)
    import vcam_py

    return vcam_py


def main():
    vcam = import_vcam_py()

    data = vcam.simulate("ex1", 300, seed=11)
    assert len(data) == 300
    assert data.covariate_count == 2
    lo, hi = data.covariate_range(0)
    assert lo < 0.0 < hi

    round_trip = vcam.Dataset.from_csv(data.to_csv())
    assert round_trip.to_csv() == data.to_csv()

    fit = vcam.fit(data, i=25, k=4)
    assert fit.segment_length == 25 and fit.interior_knots == 4
    assert fit.rss > 0.0
    value = fit.evaluate(0.5, [0.1, -0.2])
    assert isinstance(value, float)

    refit = vcam.Fit.from_text(fit.to_text())
    assert abs(refit.evaluate(0.5, [0.1, -0.2]) - value) < 1e-12

    curve = fit.alpha_grid(0, points=11)
    assert len(curve) == 11
    assert len(fit.beta_grid(1)) == 201

    ident = vcam.identify_structure(data, fit)
    assert len(ident.alpha_constant) == 2
    assert len(ident.beta_linear) == 2
    assert ident.lambda_ > 0.0 and ident.mu > 0.0

    report = vcam.monte_carlo("ex1", t=100, q=3, seed=7, comparisons=False)
    assert report["completed"] == 3
    assert report["function_names"] == ["alpha0", "alpha1", "alpha2", "beta1", "beta2"]
    assert all(m > 0.0 for m in report["three_step_mean"])
    assert report["csv"].startswith("section,name,field,mean,sd")

    print("vcam_py smoke test passed")


if __name__ == "__main__":
    main()
