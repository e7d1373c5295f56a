"""Deterministic CSV artifacts and companion figures for sweep results.

CSV files are the machine-readable contract: numbers are rendered with 9
significant digits, rows are sorted, and every file starts with a comment
line recording the config hash and seed, so a rerun with the same config
is byte-identical. Timing lives only in runtime.csv, which is inherently
non-deterministic and is kept apart for that reason. A PNG figure is
rendered next to each CSV family for human inspection; figures are never
part of the determinism contract.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .sim import SummaryStats


def fmt(value: float) -> str:
    """Canonical 9-significant-digit rendering used in every CSV cell."""
    return f"{float(value):.9g}"


def meta_line(config_sha256: str, seed: int) -> str:
    return f"# config_sha256={config_sha256} seed={seed}"


def _write_csv(path: Path, meta: str, header: list[str], rows: list[list[str]]) -> Path:
    lines = [meta, ",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_rmse_csv(out_dir: Path, summaries: list[SummaryStats], meta: str) -> Path:
    rows = [
        [fmt(s.snr_db), s.solver_id, fmt(s.rmse_m), fmt(s.p90_m), str(s.n_trials)]
        for s in sorted(summaries, key=lambda s: (s.snr_db, s.solver_id))
    ]
    header = ["snr_db", "solver", "rmse_m", "p90_m", "n_trials"]
    return _write_csv(out_dir / "rmse_vs_snr.csv", meta, header, rows)


def write_runtime_csv(out_dir: Path, summaries: list[SummaryStats], meta: str) -> Path:
    rows = [
        [fmt(s.snr_db), s.solver_id, fmt(s.mean_time_s), str(s.n_trials)]
        for s in sorted(summaries, key=lambda s: (s.snr_db, s.solver_id))
    ]
    header = ["snr_db", "solver", "mean_time_s", "n_trials"]
    return _write_csv(out_dir / "runtime.csv", meta, header, rows)


def cumulative_name(snr_db: float) -> str:
    return f"cumulative_error_{snr_db:g}.csv"


def write_cumulative_csvs(
    out_dir: Path, summaries: list[SummaryStats], meta: str
) -> list[Path]:
    """One file per SNR: sorted error samples with the empirical CDF.

    cdf is (i+1)/n at the i-th smallest sample, i.e. the right-continuous
    empirical distribution evaluated at the sample points.
    """
    paths = []
    for snr_db in sorted({s.snr_db for s in summaries}):
        rows = []
        cell = [s for s in summaries if s.snr_db == snr_db]
        for s in sorted(cell, key=lambda s: s.solver_id):
            n = s.errors.size
            rows.extend(
                [s.solver_id, fmt(err), fmt((i + 1) / n)]
                for i, err in enumerate(s.errors)
            )
        header = ["solver", "error_m", "cdf"]
        paths.append(_write_csv(out_dir / cumulative_name(snr_db), meta, header, rows))
    return paths


def write_bounds_csv(
    out_dir: Path, curve: list[tuple[float, float, float]], meta: str
) -> Path:
    rows = [
        [fmt(snr), fmt(crb_root), fmt(ccrb_root)]
        for snr, crb_root, ccrb_root in sorted(curve)
    ]
    header = ["snr_db", "sqrt_trace_crb_m", "sqrt_trace_ccrb_m"]
    return _write_csv(out_dir / "bounds.csv", meta, header, rows)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_figures(
    out_dir: Path,
    summaries: list[SummaryStats],
    curve: list[tuple[float, float, float]] | None = None,
) -> list[Path]:
    """PNG companions: RMSE vs SNR (with bounds), per-SNR ECDFs, runtime."""
    plt = _pyplot()
    paths = []
    solvers = sorted({s.solver_id for s in summaries})
    snrs = sorted({s.snr_db for s in summaries})
    by = {(s.snr_db, s.solver_id): s for s in summaries}

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for sid in solvers:
        ax.semilogy(snrs, [by[(snr, sid)].rmse_m for snr in snrs], marker="o", label=sid)
    if curve:
        xs = [row[0] for row in sorted(curve)]
        ax.semilogy(xs, [row[1] for row in sorted(curve)], "k--", label="sqrt tr CRB")
        ax.semilogy(xs, [row[2] for row in sorted(curve)], "k:", label="sqrt tr CCRB")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("RMSE (m)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "rmse_vs_snr.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    for snr in snrs:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for sid in solvers:
            s = by[(snr, sid)]
            cdf = np.arange(1, s.errors.size + 1) / s.errors.size
            ax.semilogx(s.errors, cdf, label=sid)
        ax.set_xlabel("position error (m)")
        ax.set_ylabel("empirical CDF")
        ax.set_title(f"SNR = {snr:g} dB")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"cumulative_error_{snr:g}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for sid in solvers:
        ax.plot(
            snrs,
            [1e3 * by[(snr, sid)].mean_time_s for snr in snrs],
            marker="s",
            label=sid,
        )
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("mean solve time (ms)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "runtime.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths


def render_bounds_figure(
    out_dir: Path, curve: list[tuple[float, float, float]]
) -> Path:
    plt = _pyplot()
    rows = sorted(curve)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy([r[0] for r in rows], [r[1] for r in rows], "k--", marker="o",
                label="sqrt tr CRB")
    ax.semilogy([r[0] for r in rows], [r[2] for r in rows], "k:", marker="s",
                label="sqrt tr CCRB")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("bound (m)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "bounds.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_sweep_outputs(
    out_dir: str | Path,
    summaries: list[SummaryStats],
    curve: list[tuple[float, float, float]],
    config_sha256: str,
    seed: int,
    figures: bool = True,
) -> list[Path]:
    """Write the full artifact set for one sweep; returns all paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = meta_line(config_sha256, seed)
    paths = [write_rmse_csv(out, summaries, meta)]
    paths.extend(write_cumulative_csvs(out, summaries, meta))
    paths.append(write_runtime_csv(out, summaries, meta))
    paths.append(write_bounds_csv(out, curve, meta))
    if figures:
        paths.extend(render_figures(out, summaries, curve))
        paths.append(render_bounds_figure(out, curve))
    return paths
