import json

import numpy as np

from trifuse.verify import SUITES, max_relative_error, random_config, run_all, run_suite


def test_fresh_build_passes_every_identity():
    report = run_all(n_cases=30, seed=2)
    assert report.passed, report.format()
    assert [r.name for r in report.results] == list(SUITES)


def test_perturbation_fails():
    assert not run_suite("ban-form", n_cases=3, perturb=1e-6).passed


def test_report_json_lists_identities():
    obj = json.loads(run_all(n_cases=2).to_json())
    assert {i["name"] for i in obj["identities"]} == set(SUITES)
    assert all("max_rel_error" in i for i in obj["identities"])


def test_random_configs_respect_bounds():
    rng = np.random.default_rng(0)
    for _ in range(200):
        c = random_config(rng)
        assert c["R"] in (1, 2) and 1 <= c["d_z"] <= 4
        assert all(1 <= n <= 4 for n in c["n"]) and all(1 <= d <= 6 and d % c["R"] == 0 for d in c["d"])


def test_max_relative_error():
    assert max_relative_error([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert max_relative_error([1.0, 2.5], [1.0, 2.0]) == 0.25
    assert max_relative_error([1.0], [1.0, 2.0]) == float("inf")
