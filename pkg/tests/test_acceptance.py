"""Acceptance gate: every headline criterion at its stated tolerance.

Each criterion maps to exactly one registered experiment; the experiment
runs once per session and a pass/fail line prints per criterion.
"""

import pytest

from aclab import harness

# criterion id -> (experiment, runtime budget in seconds or None)
ACCEPTANCE = [
    ("1 heteroclinic fidelity", "heteroclinic-constants", 1.0),
    ("2 interaction asymptotics", "interaction-asymptotics", 1.0),
    ("3 corrector identities", "corrector-identities", 1.0),
    ("4 PDE critical points", "single-layer-critical-point", 120.0),
    ("5 separation law", "separation-law", 60.0),
    ("6 Jacobi-field extraction", "jacobi-extraction", 600.0),
    ("7 index comparison", "index-comparison", None),
    ("8 stability inequality", "stability-inequality", None),
    ("9 geometry kernel", "geometry-kernel", 30.0),
    ("10 barrier fixed point", "barrier-fixed-point", 300.0),
    ("11 enhanced curvature bound", "enhanced-curvature", None),
]

_CACHE = {}


def _report(name, tmp_root):
    if name not in _CACHE:
        spec = harness.ExperimentSpec(name=name, out_dir=str(tmp_root), seed=0)
        _CACHE[name] = harness.run(spec)
    return _CACHE[name]


@pytest.fixture(scope="session")
def out_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.mark.parametrize("cid,experiment,budget", ACCEPTANCE, ids=[c[0] for c in ACCEPTANCE])
def test_acceptance_criterion(cid, experiment, budget, out_root):
    report = _report(experiment, out_root)
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[{status}] criterion {cid} ({experiment}, {report.elapsed:.1f}s)")
    for c in report.criteria:
        mark = "pass" if c["passed"] else "FAIL"
        print(f"    {mark}: {c['label']}  [{c['detail']}]")
    failed = [c for c in report.criteria if not c["passed"]]
    assert not failed, f"criterion {cid}: {[c['label'] for c in failed]}"
    if budget is not None:
        assert report.elapsed < budget, f"criterion {cid} exceeded {budget}s: {report.elapsed:.1f}s"
