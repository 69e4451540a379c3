"""Render a check report as TSV plus a few PNG figures."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .terms import Term  # noqa: E402


def _checks_figure(report, path: Path) -> None:
    names = list(report.results)
    counts = [len(report.results[n].offenders) for n in names]
    colors = ["#2a9d4b" if c == 0 else "#c0392b" for c in counts]
    fig, ax = plt.subplots(figsize=(7, 0.35 * len(names) + 1.2))
    ax.barh(names, [max(c, 0.05) for c in counts], color=colors)
    ax.invert_yaxis()
    ax.set_xlabel("violations")
    ax.set_title("invariant checks (green = pass)")
    for y, c in enumerate(counts):
        ax.text(max(c, 0.05), y, f" {c}", va="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _outcome_figure(report, path: Path) -> None:
    t = report.tally
    labels = ["delivered", "discarded"] + sorted(k for k in t if k.startswith("dropped_"))
    values = [t.get(k, 0) for k in labels]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(labels, values, color="#3b6ea5")
    ax.set_ylabel("envelopes")
    ax.set_title(f"envelope outcomes ({t.get('envelopes', 0)} created)")
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _activity_figure(trace, path: Path) -> None:
    xs, envs, evals, drains = [], [], [], []
    n_env = n_eval = 0
    for i, e in enumerate(trace):
        if not isinstance(e, Term):
            continue
        if e.functor == "env":
            n_env += 1
        elif e.functor == "eval":
            n_eval += 1
        elif e.functor == "drain":
            drains.append(i)
        xs.append(i)
        envs.append(n_env)
        evals.append(n_eval)
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(xs, evals, label="evaluations")
    ax.plot(xs, envs, label="envelopes")
    for d in drains:
        ax.axvline(d, color="grey", lw=0.5, ls=":")
    ax.set_xlabel("trace entry")
    ax.set_ylabel("cumulative count")
    ax.legend(loc="upper left")
    ax.set_title("run activity (dotted lines: drains)")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def write_report(report, trace, out_dir) -> list[Path]:
    """Write ``report.tsv``, ``violations.tsv`` and three figures into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.tsv", out / "violations.tsv"]
    written[0].write_text(report.to_tsv(), encoding="utf-8")
    written[1].write_text("check\tentry\tmessage\n" + report.details(), encoding="utf-8")
    for name, draw, arg in (
        ("checks.png", _checks_figure, report),
        ("envelopes.png", _outcome_figure, report),
        ("activity.png", _activity_figure, trace),
    ):
        draw(arg, out / name)
        written.append(out / name)
    return written
