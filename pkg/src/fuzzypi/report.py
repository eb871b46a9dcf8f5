"""CSV writers and optional figures.

Every CSV starts with a ``# schema: <name>/<version>`` comment line followed
by the column header. Floats are written with ``repr`` so reruns are
byte-identical. Figures need matplotlib, which is imported lazily and is not
required for anything else.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

SCHEMAS = {
    "surface_fixed": ("surface-fixed", 1, ["x0", "x1", "v_d", "v_d_raw"]),
    "surface_reference": ("surface-reference", 1, ["x0", "x1", "v_d"]),
    "mse_sweep": ("mse-sweep", 1, ["N", "T", "mse", "max_abs_err"]),
    "robot_run": ("robot-run", 1, ["t", "theta1_deg", "theta2_deg", "theta3_deg",
                                   "sp1_deg", "sp2_deg", "sp3_deg", "tau1", "tau2", "tau3"]),
    "robot_summary": ("robot-summary", 1, ["N", "controller", "segment", "joint", "setpoint_deg",
                                           "final_error_deg", "tolerance_deg", "settled"]),
    "robot_compare": ("robot-compare", 1, ["N", "max_diff_deg", "transient_fraction"]),
    "step_log": ("step-log", 1, ["n", "y", "y_sp", "e", "e_d", "x0", "x1", "v_d", "r"]),
    "costmodel_residuals": ("costmodel-residuals", 1, ["variant", "quantity", "N", "T", "table",
                                                       "plane", "rel_residual"]),
}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, schema: str, rows) -> Path:
    name, version, header = SCHEMAS[schema]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema: {name}/{version}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{schema}: expected {len(header)} columns, got {len(row)}")
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[str, list[str], list[list[str]]]:
    """(schema tag, header, rows as strings)."""
    with Path(path).open() as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema:"):
            raise ValueError(f"{path}: missing schema line")
        r = csv.reader(fh)
        header = next(r)
        return first.split(":", 1)[1].strip(), header, [row for row in r]


def surface_rows(surface):
    for a, b, v, raw in zip(surface.x0, surface.x1, surface.fixed, surface.fixed_raw):
        yield a, b, v, int(raw)


def reference_rows(surface):
    for a, b, v in zip(surface.x0, surface.x1, surface.reference):
        yield a, b, v


def run_rows(res):
    for i in range(res.t.shape[0]):
        yield (res.t[i], *res.theta_deg[i], *res.setpoint_deg[i], *res.tau[i])


# -- figures ----------------------------------------------------------------

def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("figures need matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_surface(surface, path) -> Path:
    plt = _pyplot()
    n = int(round(np.sqrt(surface.x0.size)))
    X0 = surface.x0.reshape(n, n)
    X1 = surface.x1.reshape(n, n)
    fig, axes = plt.subplots(1, 3, figsize=(15, 4.5), subplot_kw={"projection": "3d"})
    for ax, z, title in zip(axes, (surface.fixed, surface.reference, surface.error),
                            ("fixed point", "float64 reference", "reference - fixed")):
        ax.plot_surface(X0, X1, z.reshape(n, n), cmap="viridis", linewidth=0)
        ax.set_xlabel("x0")
        ax.set_ylabel("x1")
        ax.set_title(f"{title} (N={surface.n_bits}, T={surface.t_bits})")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_sweep(reports, path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ts = sorted({r.t_bits for r in reports})
    for t in ts:
        rs = sorted((r for r in reports if r.t_bits == t), key=lambda r: r.n_bits)
        ax.semilogy([r.n_bits for r in rs], [r.mse for r in rs], "o-", label=f"T={t}")
    ax.set_xlabel("N (fractional bits)")
    ax.set_ylabel("MSE vs float64 reference")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_trajectories(results, path, joint: int) -> Path:
    """One joint, every run in ``results`` plus the set point of the first."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4))
    first = results[0]
    ax.step(first.t, first.setpoint_deg[:, joint], "k--", where="post", label="set point")
    for res in results:
        label = "float64 reference" if res.controller == "float" else f"N={res.n_bits}"
        ax.plot(res.t, res.theta_deg[:, joint], label=label)
    ax.set_xlabel("t (s)")
    ax.set_ylabel(f"theta{joint + 1} (deg)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)
