"""Self-check suite: all green on a healthy build, red under injected bugs."""

import time

import numpy as np
import pytest

import triloc.manifold
from triloc.validate import CHECKS, render_table, run_checks


class TestHealthySuite:
    def test_all_checks_pass(self):
        results = run_checks()
        failing = [r.name for r in results if not r.passed]
        assert not failing, f"failing checks: {failing}"

    def test_runs_well_under_budget(self):
        start = time.perf_counter()
        run_checks()
        assert time.perf_counter() - start < 10.0

    def test_check_names_unique_and_complete(self):
        names = [name for name, _ in CHECKS]
        assert len(set(names)) == len(names)
        results = run_checks()
        assert [r.name for r in results] == names

    def test_deterministic(self):
        a = run_checks()
        b = run_checks()
        assert [(r.name, r.worst) for r in a] == [(r.name, r.worst) for r in b]

    def test_table_mentions_every_check_and_verdict(self):
        results = run_checks()
        table = render_table(results)
        for r in results:
            assert r.name in table
        assert "all checks passed" in table


class TestMutationHook:
    def test_projection_sign_error_is_caught(self, monkeypatch):
        orig = triloc.manifold.tangent_project
        monkeypatch.setattr(
            triloc.manifold, "tangent_project", lambda p, z: -orig(p, z)
        )
        results = run_checks()
        failing = [r.name for r in results if not r.passed]
        assert "projection idempotent" in failing
        assert "FAIL" in render_table(results)

    def test_retraction_drift_is_caught(self, monkeypatch):
        orig = triloc.manifold.retract
        d = 0.1

        def drifted(point, xi):
            out = orig(point, xi)
            shifted = out.x + 1e-6 * d  # uniform translation keeps feasibility
            return triloc.manifold.TrianglePoint(shifted, out.d)

        monkeypatch.setattr(triloc.manifold, "retract", drifted)
        results = run_checks()
        failing = [r.name for r in results if not r.passed]
        assert "retraction identity at zero" in failing

    def test_crash_is_reported_not_raised(self, monkeypatch):
        def boom(point, z):
            raise RuntimeError("synthetic fault")

        monkeypatch.setattr(triloc.manifold, "tangent_project", boom)
        results = run_checks()
        crashed = [r for r in results if "synthetic fault" in r.detail]
        assert crashed and not any(r.passed for r in crashed)
