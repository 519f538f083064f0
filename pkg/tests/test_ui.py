# -*- coding: utf-8 -*-
"""终端输出与进度报告"""

import io

import numpy as np
import pandas as pd

from src.config import SYMBOLS
from src.data_model import Hyperparameters
from src.sampler import Schedule, run_chain
from src.ui import ChainProgress, colored_print, print_table

from conftest import make_dataset


def test_colored_print_skips_ansi_off_tty():
    stream = io.StringIO()
    colored_print('plain', 'system_error', file=stream)
    assert stream.getvalue() == 'plain\n'


def test_progress_reports_on_schedule():
    stream = io.StringIO()
    dataset = make_dataset(5, categories=(2,))
    schedule = Schedule(n_iter=25, burn_in=5, n_init_clusters=3, seed=2)
    progress = ChainProgress(every=10, n_iter=25, stream=stream)
    run_chain(dataset, Hyperparameters.default((2,)), schedule, progress=progress.for_chain(1))
    lines = stream.getvalue().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith(f"{SYMBOLS['chain']} 链 1 迭代 10/25")
    assert '25/25' in lines[-1]


def test_progress_disabled():
    stream = io.StringIO()
    progress = ChainProgress(every=0, n_iter=10, stream=stream)
    progress.report(0, 10, state=None)
    assert stream.getvalue() == ''


def test_print_table(capsys):
    print_table(pd.DataFrame({'cluster': [0, 1], 'size': [3, 4]}), title='sizes',
                columns=['size'])
    out = capsys.readouterr().out
    assert 'sizes' in out
    assert 'cluster' not in out
    assert np.all([s in out for s in ('3', '4')])
