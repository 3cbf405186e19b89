"""Tab-separated experiment reports and the figures drawn next to them.

A report is a header line followed by one record per line::

    scenario  backend  trials  observed  expected  sigma  result

``result`` is PASS, FAIL or INFO.  :func:`write_report` also renders a PNG
with the same stem: observed against expected with a 3-sigma bar.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

PASS = 'PASS'
FAIL = 'FAIL'
INFO = 'INFO'

COLUMNS = ('scenario', 'backend', 'trials', 'observed', 'expected', 'sigma', 'result')


@dataclass(frozen=True)
class ReportRecord:
    scenario: str
    backend: str
    trials: int
    observed: float
    expected: float
    sigma: float
    result: str

    def line(self) -> str:
        return '\t'.join([self.scenario, self.backend, str(self.trials), f'{self.observed:.6f}',
                          f'{self.expected:.6f}', f'{self.sigma:.6f}', self.result])

    @property
    def failed(self) -> bool:
        return self.result == FAIL


def format_report(records: Sequence[ReportRecord]) -> str:
    return '\n'.join(['\t'.join(COLUMNS)] + [r.line() for r in records]) + '\n'


def parse_report(text: str) -> list[ReportRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or tuple(lines[0].split('\t')) != COLUMNS:
        raise ValueError('missing report header')
    records = []
    for ln in lines[1:]:
        f = ln.split('\t')
        if len(f) != len(COLUMNS):
            raise ValueError(f'bad report line {ln!r}')
        records.append(ReportRecord(f[0], f[1], int(f[2]), float(f[3]), float(f[4]), float(f[5]), f[6]))
    return records


def figure_path(report_path) -> Path:
    return Path(report_path).with_suffix('.png')


def render_figure(records: Sequence[ReportRecord], path, *,
                  running: Optional[Sequence[float]] = None, title: str = '') -> Path:
    """Draw observed vs expected per record; add the running rate if given."""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    ncols = 2 if running else 1
    fig, axes = plt.subplots(1, ncols, figsize=(6.4 * ncols, 4.0), squeeze=False)
    ax = axes[0][0]
    labels = [f'{r.scenario}\n{r.backend}' for r in records]
    xs = range(len(records))
    colors = {PASS: 'tab:green', FAIL: 'tab:red', INFO: 'tab:gray'}
    ax.bar(xs, [r.observed for r in records], color=[colors.get(r.result, 'tab:blue') for r in records],
           alpha=0.7, label='observed')
    ax.errorbar(xs, [r.expected for r in records], yerr=[3 * r.sigma for r in records],
                fmt='_', color='black', capsize=4, label='expected $\\pm 3\\sigma$')
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=60, ha='right', fontsize=7)
    ax.legend(fontsize=8)
    ax.set_title(title or 'experiment report', fontsize=10)

    if running:
        ax2 = axes[0][1]
        head = records[0]
        ax2.plot(range(1, len(running) + 1), running, lw=1, label='running accept rate')
        ax2.axhline(head.expected, color='black', lw=1, label='1/|G|')
        band = [3 * (head.expected * (1 - head.expected) / n) ** 0.5 for n in range(1, len(running) + 1)]
        ns = range(1, len(running) + 1)
        ax2.fill_between(ns, [head.expected - b for b in band], [head.expected + b for b in band],
                         color='gray', alpha=0.25, label='$\\pm 3\\sigma$')
        ax2.set_xscale('log')
        ax2.set_ylim(0, max(4 * head.expected, 1e-3))
        ax2.set_xlabel('trials')
        ax2.legend(fontsize=8)
        ax2.set_title(f'collision rate on {head.backend}', fontsize=10)

    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def write_report(records: Sequence[ReportRecord], path, *, figures: bool = True,
                 running: Optional[Sequence[float]] = None, title: str = '') -> Optional[Path]:
    """Write the TSV report; return the figure path if one was drawn."""
    from .store import atomic_write_text
    atomic_write_text(path, format_report(records))
    if figures and records:
        return render_figure(records, figure_path(path), running=running, title=title)
    return None
