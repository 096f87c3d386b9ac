#!/usr/bin/env python3
"""
图表模块
把扫描结果画成对数坐标的 中位数评估次数-n 折线图（SVG），
每个问题一条数据曲线，外加 fit_scaling 的拟合曲线（虚线）。

使用方法:
    python3 charts.py results.csv scaling.svg
"""

import logging
import sys
from itertools import groupby
from pathlib import Path

import matplotlib
matplotlib.use('Agg')
matplotlib.rcParams['svg.fonttype'] = 'none'    # SVG 中保留文字
import matplotlib.pyplot as plt
import numpy as np

from errors import ExperimentError
from experiments import fit_scaling, read_csv, summarize

logger = logging.getLogger(__name__)

FIGURE_SIZE = (7, 5)
MARKERS = {'leadingones': 'o', 'binval': 's'}


def render_scaling_chart(summaries, path, title=None):
    """
    绘制并保存 SVG

    Args:
        summaries: summarize() 的结果
        path: 输出文件
        title: 图标题

    Returns:
        {problem: ScalingFit 或 None}
    """
    if not summaries:
        raise ExperimentError('no data', "没有可绘制的数据")

    fits = {}
    fig, ax = plt.subplots(figsize=FIGURE_SIZE)
    ordered = sorted(summaries, key=lambda s: (s.problem, s.n))
    for problem, cells in groupby(ordered, key=lambda s: s.problem):
        cells = list(cells)
        n = np.array([c.n for c in cells], dtype=float)
        lam = np.array([c.lam for c in cells], dtype=float)
        median = np.array([c.median for c in cells])
        line, = ax.plot(n, median, marker=MARKERS.get(problem, 'o'), label=f"{problem} (median T)")

        try:
            fit = fit_scaling(cells)
        except ExperimentError as e:
            logger.warning(f"⚠️ {problem}: 跳过拟合 ({e})")
            fit = None
        fits[problem] = fit
        if fit is not None:
            ax.plot(n, fit.predict(n, lam), linestyle='--', color=line.get_color(),
                    label=f"{problem} fit: {fit.a:.3g}·n² + {fit.b:.3g}·nλ ln λ")

    ax.set_xscale('log')
    ax.set_yscale('log')
    ax.set_xlabel('n')
    ax.set_ylabel('evaluations')
    ax.set_title(title or 'PBIL optimisation time')
    ax.grid(True, which='both', alpha=0.3)
    ax.legend()

    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(Path(path), format='svg')
    except OSError as e:
        raise ExperimentError('writable path', f"{path}: {e}") from e
    finally:
        plt.close(fig)

    logger.info(f"✅ 图表已保存: {path}")
    return fits


def plot_csv(csv_path, svg_path, title=None):
    """读取扫描 CSV 并绘图，默认标题带上 η"""
    records = read_csv(csv_path)
    if not records:
        raise ExperimentError('no data', f"{csv_path}: 没有数据")
    if title is None:
        etas = ', '.join(f"{eta:g}" for eta in sorted({r.eta for r in records}))
        title = f"PBIL optimisation time (η={etas})"
    return render_scaling_chart(summarize(records), svg_path, title)


# ============ 使用示例 ============
if __name__ == '__main__':
    if len(sys.argv) < 3:
        print("用法: python3 charts.py results.csv scaling.svg")
        sys.exit(1)
    plot_csv(sys.argv[1], sys.argv[2])
