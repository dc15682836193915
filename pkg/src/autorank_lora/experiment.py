"""Run, sweep and theory drivers that write the documented output files.

Run directory layout (schema version ``RUN_SCHEMA``):

``summary.json``
    config echo, final losses, recovery error, final retained counts and
    every restart report.
``epochs.csv``
    ``epoch,train_loss,eval_loss,p,alpha,I_0[,I_1...]``; ``p`` and ``alpha``
    are empty on epochs without a restart.
``restarts.csv``
    ``epoch,layer,I,sigma,spectrum_json``, one row per restarted factor.
``spectrum.csv``
    ``epoch,layer,index,singular_value`` (pre-restart spectra).
``adapters.json``
    final adapter matrices, row-major.

Sweep tables have columns ``seed,mode,final_eval,final_I,recovery_error``
followed by IQR columns that are filled only on the aggregate rows, and a
``status`` column.

Floats are written with ``repr`` so identical runs give identical bytes.
Wall-clock timings are printed, never written.
"""

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .adapter import effective_update
from .analysis import SpectrumTrace, effective_rank, grid_summary_json, recovery_error, sphere_grid
from .errors import TrainingDiverged
from .plots import line_chart, spectrum_heatline
from .spectral import RESTART_CSV_HEADER
from .tasks import task_from_descriptor
from .trainer import train

RUN_SCHEMA = "autorank-lora/run/1"
SWEEP_SCHEMA = "autorank-lora/sweep/1"
THEORY_SCHEMA = "autorank-lora/theory/1"
SWEEP_HEADER = (
    "seed", "mode", "final_eval", "final_I", "recovery_error",
    "final_eval_iqr", "final_I_iqr", "recovery_error_iqr", "status",
)


def _num(x):
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return ""
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _json_num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def network_recovery_error(network, task):
    """Relative Frobenius error of all learned updates stacked against all
    planted updates."""
    learned = np.concatenate([effective_update(a).ravel() for a in network])
    truth = np.concatenate([t.true_update.ravel() for t in task.layers])
    return recovery_error(learned, truth)


def summarize(record, task, config):
    network = record.adapters
    return {
        "schema": RUN_SCHEMA,
        "config": config.to_flat(),
        "final_train_loss": record.epoch_losses[-1],
        "final_eval_loss": record.final_eval,
        "reference_loss": record.reference_loss,
        "recovery_error": network_recovery_error(network, task),
        "final_I": list(record.final_retained),
        "effective_rank_99": [effective_rank(effective_update(a), 0.99) for a in network],
        "restart_count": len(record.restart_epochs),
        "restart_epochs": record.restart_epochs,
        "restarts": [r.to_dict() for r in record.reports],
    }


def epochs_csv(record):
    n_adapters = len(record.adapters)
    header = ("epoch", "train_loss", "eval_loss", "p", "alpha") + tuple(
        f"I_{j}" for j in range(n_adapters)
    )
    rows = [
        (row.epoch, _num(row.train_loss), _num(row.eval_loss), _num(row.p), _num(row.alpha))
        + tuple(row.retained)
        for row in record.epochs
    ]
    return _csv_text(header, rows)


def restarts_csv(record):
    rows = [row for report in record.reports for row in report.csv_rows()]
    return _csv_text(RESTART_CSV_HEADER, rows)


def write_plots(out_dir, epochs_text, spectrum_text):
    """Render SVG charts from the CSV outputs of a run."""
    rows = list(csv.DictReader(io.StringIO(epochs_text)))
    ep = [int(r["epoch"]) for r in rows]

    def col(name):
        return [float(r[name]) if r[name] else float("nan") for r in rows]

    _write(os.path.join(out_dir, "loss.svg"), line_chart(
        {"train": (ep, col("train_loss")), "eval": (ep, col("eval_loss"))},
        title="loss per epoch", xlabel="epoch", ylabel="MSE", log_y=True,
    ))
    i_cols = [k for k in rows[0] if k.startswith("I_")] if rows else []
    _write(os.path.join(out_dir, "retained.svg"), line_chart(
        {k: (ep, col(k)) for k in i_cols},
        title="retained count I", xlabel="epoch", ylabel="I",
    ))
    trace = SpectrumTrace.from_csv(spectrum_text)
    layers = sorted({name for _, layers in trace.entries for name in layers})
    for name in layers:
        _write(os.path.join(out_dir, f"spectrum_{name}.svg"), spectrum_heatline(trace, name))


def run_experiment(config, out_dir=None, log=None):
    """Train once and write the run directory. Returns the summary dict."""
    out_dir = out_dir or config.resolved_output_dir()
    os.makedirs(out_dir, exist_ok=True)
    task = task_from_descriptor(config.task)
    record = train(task, config.train, log=log)
    summary = summarize(record, task, config)
    epochs_text = epochs_csv(record)
    spectrum_text = SpectrumTrace.from_reports(record.reports).to_csv()
    _write(os.path.join(out_dir, "summary.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write(os.path.join(out_dir, "epochs.csv"), epochs_text)
    _write(os.path.join(out_dir, "restarts.csv"), restarts_csv(record))
    _write(os.path.join(out_dir, "spectrum.csv"), spectrum_text)
    _write(os.path.join(out_dir, "adapters.json"), json.dumps(record.adapters.to_dict()) + "\n")
    if config.emit_plots:
        write_plots(out_dir, epochs_text, spectrum_text)
    if log is not None:
        log(f"finished in {record.duration:.2f}s, final eval {record.final_eval:.4g}")
    return summary


def _sweep_one(args):
    config, seed, out_dir = args
    results = []
    for mode in ("ac_lora", "fixed_rank_baseline"):
        run_cfg = config.with_seed(seed).with_mode(mode)
        run_dir = os.path.join(out_dir, f"seed_{seed}", mode)
        try:
            s = run_experiment(run_cfg, run_dir)
            results.append((seed, mode, s["final_eval_loss"], max(s["final_I"]), s["recovery_error"], "ok"))
        except TrainingDiverged as exc:
            results.append((seed, mode, float("nan"), None, float("nan"), f"diverged: {exc}"))
    return results


def _iqr(values):
    q75, q25 = np.percentile(values, [75, 25])
    return float(q75 - q25)


def sweep_rows(results):
    """Per-seed rows followed by one median/IQR aggregate row per mode."""
    rows = [(s, m, _num(e), _num(i), _num(r), "", "", "", st) for s, m, e, i, r, st in results]
    for mode in ("ac_lora", "fixed_rank_baseline"):
        ok = [r for r in results if r[1] == mode and r[5] == "ok"]
        if not ok:
            rows.append(("median", mode, "", "", "", "", "", "", "no successful runs"))
            continue
        evals = [r[2] for r in ok]
        ranks = [float(r[3]) for r in ok]
        recs = [r[4] for r in ok]
        rows.append((
            "median", mode,
            _num(float(np.median(evals))), _num(float(np.median(ranks))), _num(float(np.median(recs))),
            _num(_iqr(evals)), _num(_iqr(ranks)), _num(_iqr(recs)), f"n={len(ok)}",
        ))
    return rows


def run_sweep(config, seeds, out_dir=None, jobs=1):
    """Run both modes for every seed; write ``sweep.csv`` and
    ``sweep.json``. Returns ``(rows, all_ok)``."""
    out_dir = out_dir or config.resolved_output_dir()
    os.makedirs(out_dir, exist_ok=True)
    tasks = [(config, int(s), out_dir) for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_seed = list(pool.map(_sweep_one, tasks))
    else:
        per_seed = [_sweep_one(t) for t in tasks]
    results = [r for chunk in sorted(per_seed, key=lambda c: c[0][0]) for r in chunk]
    rows = sweep_rows(results)
    _write(os.path.join(out_dir, "sweep.csv"), _csv_text(SWEEP_HEADER, rows))
    doc = {
        "schema": SWEEP_SCHEMA,
        "config": config.to_flat(),
        "seeds": [int(s) for s in seeds],
        "rows": [dict(zip(SWEEP_HEADER, row)) for row in rows],
    }
    _write(os.path.join(out_dir, "sweep.json"), json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return rows, all(r[5] == "ok" for r in results)


def run_theory(dimensions, samples, trials, seed, out_dir):
    """Hypersphere ratio grid; writes ``theory.csv`` and
    ``theory_summary.json``. Returns the grid."""
    os.makedirs(out_dir, exist_ok=True)
    grid = sphere_grid(dimensions, samples, trials, seed)
    rows = [
        (R, lam, t, repr(float(ratio)))
        for (R, lam) in sorted(grid)
        for t, ratio in enumerate(grid[(R, lam)].ratios)
    ]
    _write(os.path.join(out_dir, "theory.csv"), _csv_text(("dimension", "samples", "trial", "ratio"), rows))
    summary = json.loads(grid_summary_json(grid))
    summary.update({"schema": THEORY_SCHEMA, "seed": seed, "trials": trials})
    _write(os.path.join(out_dir, "theory_summary.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return grid
