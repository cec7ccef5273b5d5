import filecmp
import json
import os
import shutil
import sys
import tempfile
from collections import defaultdict
from shutil import which
from typing import Any, Dict, List
from unittest import TestCase, skipUnless

import pexpect

PROGRAM = "metarec"


@skipUnless(which(PROGRAM), reason=f"requires program {PROGRAM!r}")
class TestPipeline(TestCase):
    """synth -> extract -> accuracy -> targets -> train -> recommend"""

    def setUp(self) -> None:
        self.workdir = tempfile.mkdtemp(prefix="metarec_")

    def tearDown(self) -> None:
        shutil.rmtree(self.workdir, ignore_errors=True)

    def path(self, *parts: str) -> str:
        return os.path.join(self.workdir, *parts)

    def run_metarec(self, args: str, exitcode: int = 0, timeout: int = 600) -> None:
        cmd = f'{PROGRAM} {args}'
        proc = pexpect.spawn(cmd, logfile=sys.stdout.buffer, timeout=timeout)
        proc.expect(pexpect.EOF)
        if proc.isalive():
            proc.wait()
        assert proc.exitstatus == exitcode, proc.exitstatus

    def test_pipeline(self) -> None:
        self.run_metarec(f'synth --count 24 --seed 1 --out {self.path("data")}')
        self.run_metarec(f'extract {self.path("data")} --out {self.path("features.csv")}')
        self.run_metarec(
            f'accuracy {self.path("data")} --out {self.path("acc")} '
            f'--repetitions 2 --folds 5 --candidates naive-bayes 1nn tree decision-node'
        )
        self.run_metarec(f'targets {self.path("acc")} --out {self.path("targets.csv")}')
        self.run_metarec(
            f'train --features {self.path("features.csv")} --targets {self.path("targets.csv")} '
            f'--out {self.path("bundle")}'
        )
        assert os.path.exists(self.path('bundle', 'manifest.json'))
        self.run_metarec(
            f'recommend {self.path("data", "synth0000.csv")} --bundle {self.path("bundle")} '
            f'--out {self.path("rec.csv")}'
        )
        with open(self.path('rec.csv')) as fp:
            assert fp.readline().strip() == 'algorithm,probability,pick,rank'

        self.run_metarec(
            f'xval --features {self.path("features.csv")} --targets {self.path("targets.csv")} '
            f'--repetitions 1 --folds 4 --out {self.path("report")}'
        )
        assert os.path.exists(self.path('report', 'ranking_loss.csv'))

    def test_bad_input(self) -> None:
        os.mkdir(self.path('empty'))
        self.run_metarec(f'extract {self.path("empty")} --out {self.path("f.csv")}', exitcode=2)
        self.run_metarec(f'recommend {self.path("nothing.csv")} --bundle {self.path("nope")}', exitcode=1)

    def test_deterministic_report(self) -> None:
        self.run_metarec(f'synth --count 20 --seed 3 --out {self.path("data")}')
        self.run_metarec(f'extract {self.path("data")} --out {self.path("features.csv")}')
        self.run_metarec(
            f'accuracy {self.path("data")} --out {self.path("acc")} --repetitions 2 --folds 3 '
            f'--candidates majority naive-bayes tree'
        )
        self.run_metarec(f'targets {self.path("acc")} --out {self.path("targets.csv")}')
        reports: List[str] = []
        for name in ('a', 'b'):
            reports.append(self.path(name))
            self.run_metarec(
                f'xval --features {self.path("features.csv")} --targets {self.path("targets.csv")} '
                f'--repetitions 1 --folds 4 --seed 7 --out {self.path(name)}'
            )
        match, mismatch, errors = filecmp.cmpfiles(
            reports[0], reports[1], sorted(os.listdir(reports[0])), shallow=False
        )
        assert not mismatch and not errors, (mismatch, errors)


@skipUnless(which(PROGRAM), reason=f"requires program {PROGRAM!r}")
@skipUnless(os.environ.get("METAREC_SLOW"), reason="set METAREC_SLOW=1 for the replication run")
class TestReplication(TestCase):
    """Full protocol on synthetic meta-corpora of 200 problems, averaged over
    seeds (METAREC_SEEDS, default 20)."""

    def setUp(self) -> None:
        self.workdir = tempfile.mkdtemp(prefix="metarec_slow_")
        self.seeds = range(int(os.environ.get("METAREC_SEEDS", "20")))

    def tearDown(self) -> None:
        shutil.rmtree(self.workdir, ignore_errors=True)

    def run_metarec(self, args: str) -> None:
        proc = pexpect.spawn(f'{PROGRAM} {args}', logfile=sys.stdout.buffer, timeout=3600)
        proc.expect(pexpect.EOF)
        if proc.isalive():
            proc.wait()
        assert proc.exitstatus == 0, proc.exitstatus

    def replicate(self, seed: int) -> Dict[str, Any]:
        def path(name: str) -> str:
            return os.path.join(self.workdir, str(seed), name)

        self.run_metarec(f'synth --count 200 --seed {seed} --out {path("data")}')
        self.run_metarec(f'extract {path("data")} --seed {seed} --out {path("features.csv")} --jobs 4')
        self.run_metarec(f'accuracy {path("data")} --seed {seed} --out {path("acc")} --jobs 4')
        self.run_metarec(f'targets {path("acc")} --out {path("targets.csv")}')
        self.run_metarec(
            f'xval --features {path("features.csv")} --targets {path("targets.csv")} '
            f'--mode every --seed {seed} --out {path("report")} --jobs 4'
        )
        with open(os.path.join(path('report'), 'report.json')) as fp:
            return json.load(fp)

    def test_ensemble_against_base_models(self) -> None:
        loss: Dict[str, List[float]] = defaultdict(list)
        precision: Dict[str, List[float]] = defaultdict(list)
        kept: Dict[str, List[float]] = defaultdict(list)
        for seed in self.seeds:
            doc = self.replicate(seed)
            for name, cell in doc['summary']['ranking_loss'].items():
                loss[name].append(cell['mean'])
            for name, cell in doc['summary']['average_precision'].items():
                precision[name].append(cell['mean'])
            for mode, count in doc['kept_models'].items():
                kept[mode].append(count)

        def mean(values: List[float]) -> float:
            return sum(values) / len(values)

        base = [name for name in loss if not name.startswith('En')]
        best_loss = min(mean(loss[name]) for name in base)
        best_precision = max(mean(precision[name]) for name in base)
        assert mean(loss['En:accurate-and-diverse']) <= best_loss + 0.02
        assert mean(precision['En:accurate-and-diverse']) >= best_precision - 0.02
        assert mean(kept['diverse']) < mean(kept['all'])
        assert mean(loss['En:diverse']) <= mean(loss['En:all']) + 0.02
