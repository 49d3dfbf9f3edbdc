import csv
import json
from pathlib import Path

import numpy as np
import pytest

from flexhose.cli import main
from flexhose.config import channel_text, dump_config, load_config, parse_channel
from flexhose.jets import ConstantChannel, PolynomialChannel, SinusoidChannel

SMALL_SETPOINT = """
[system]
gravity = 9.81

[hose]
links = 4
link_length = 0.25
node_mass = 0.12

[quadrotor.0]
mass = 0.85
inertia = 0.0557, 0.0557, 0.1050

[quadrotor.4]
mass = 0.85
inertia = 0.0557, 0.0557, 0.1050
target = 0.6, 0.0, 0.0

[scenario]
mode = setpoint
duration = 3.0
dt = 0.002
seed = 4
x0_target = 0.0, 0.0, 0.0
link_error_deg = 8.0

[controller]
kind = lqr
control_dt = 0.01

[output]
log_rate = 50.0
"""

SMALL_TRAJ = """
[hose]
links = 2
link_length = 0.4
node_mass = 0.15

[quadrotor.0]
mass = 0.85
inertia = 0.0557, 0.0557, 0.1050

[quadrotor.2]
mass = 0.85
inertia = 0.0557, 0.0557, 0.1050

[scenario]
mode = trajectory
duration = 1.0
dt = 0.002
seed = 0

[controller]
kind = open-loop
control_dt = 0.01

[output]
log_rate = 50.0

[flat.x0]
x = sinusoid freq=1/4 amp_cos=-2 offset=2
y = sinusoid freq=1/5 amp_sin=2.5
z = sinusoid freq=1/7 amp_cos=1.5

[flat.tension.0]
x = constant value=1.1
y = constant value=0.0
z = constant value=-2.2
"""


@pytest.fixture()
def setpoint_cfg(tmp_path):
    path = tmp_path / "setpoint.ini"
    path.write_text(SMALL_SETPOINT)
    return path


@pytest.fixture()
def traj_cfg(tmp_path):
    path = tmp_path / "traj.ini"
    path.write_text(SMALL_TRAJ)
    return path


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestChannelGrammar:
    def test_roundtrip(self):
        for chan in (
            ConstantChannel(-3.27),
            SinusoidChannel(freq=0.25, amp_cos=-2.0, offset=2.0),
            PolynomialChannel((0.0, 1.0, -0.5)),
        ):
            assert parse_channel(channel_text(chan)) == chan

    def test_fractions(self):
        chan = parse_channel("sinusoid freq=1/7 amp_cos=1.5")
        assert chan.freq == pytest.approx(1.0 / 7.0)

    def test_bad_kind_rejected(self):
        from flexhose.config import ConfigError

        with pytest.raises(ConfigError):
            parse_channel("wavelet freq=1")


class TestConfigRoundtrip:
    def test_parse_serialize_parse(self, setpoint_cfg, tmp_path):
        cfg = load_config(setpoint_cfg)
        text = dump_config(cfg)
        second = tmp_path / "second.ini"
        second.write_text(text)
        cfg2 = load_config(second)
        assert cfg2.params.to_dict() == cfg.params.to_dict()
        assert cfg2.scenario.duration == cfg.scenario.duration
        assert cfg2.scenario.lqr_scalars == cfg.scenario.lqr_scalars

    def test_missing_key_is_anchored(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[hose]\nlinks = 3\n")
        from flexhose.config import ConfigError

        with pytest.raises(ConfigError, match=r"\[hose\] link_length"):
            load_config(bad)


class TestSimulateCommand:
    def test_setpoint_errors_decay(self, setpoint_cfg, tmp_path):
        out = tmp_path / "out"
        code = main(["simulate", "--config", str(setpoint_cfg), "--out-dir", str(out)])
        assert code == 0
        header, rows = read_csv(out / "log.csv")
        psi_cols = [i for i, h in enumerate(header) if h.startswith("psi_q")]
        first = max(float(rows[0][i]) for i in psi_cols)
        last = max(float(rows[-1][i]) for i in psi_cols)
        assert last < first
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["diverged"] is False
        assert manifest["seed"] == 4
        assert Path(manifest["outputs"][0]).name == "log.csv"

    def test_malformed_config_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[hose\nlinks = oops")
        code = main(["simulate", "--config", str(bad), "--out-dir", str(tmp_path)])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_unreachable_target_exit_2(self, setpoint_cfg, tmp_path, capsys):
        text = setpoint_cfg.read_text().replace("target = 0.6, 0.0, 0.0", "target = 2.0, 0.0, 0.0")
        cfg = tmp_path / "unreachable.ini"
        cfg.write_text(text)
        code = main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path)])
        assert code == 2
        assert "unreachable" in capsys.readouterr().err

    def test_missing_config_exit_2(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.ini"),
                     "--out-dir", str(tmp_path)]) == 2

    def test_divergence_exit_3(self, tmp_path, capsys):
        # zero input from a hover setpoint: the chain free-falls past the
        # 1 km sanity bound within 15 s and the run is flagged diverged
        text = SMALL_SETPOINT.replace("kind = lqr", "kind = none") \
                             .replace("duration = 3.0", "duration = 15.0") \
                             .replace("dt = 0.002", "dt = 0.01")
        cfg = tmp_path / "fall.ini"
        cfg.write_text(text)
        code = main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "fall")])
        assert code == 3
        assert "diverged" in capsys.readouterr().err

    def test_internal_numeric_failure_exit_4(self, setpoint_cfg, tmp_path, monkeypatch):
        from flexhose import cli as cli_mod
        from flexhose.errors import RiccatiBlowupError

        def boom(scenario):
            raise RiccatiBlowupError("synthetic blow-up", time=1.0)

        monkeypatch.setattr(cli_mod, "run", boom)
        code = main(["simulate", "--config", str(setpoint_cfg), "--out-dir", str(tmp_path)])
        assert code == 4

    def test_override_flags_applied(self, setpoint_cfg, tmp_path):
        out = tmp_path / "out2"
        code = main(["simulate", "--config", str(setpoint_cfg), "--out-dir", str(out),
                     "--duration", "0.5", "--seed", "9"])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 9
        _, rows = read_csv(out / "log.csv")
        assert float(rows[-1][0]) == pytest.approx(0.5)


class TestPlanCommand:
    def test_residual_column_small(self, traj_cfg, tmp_path):
        out = tmp_path / "plan"
        code = main(["plan", "--config", str(traj_cfg), "--out-dir", str(out)])
        assert code == 0
        header, rows = read_csv(out / "plan.csv")
        ridx = header.index("residual")
        assert max(float(r[ridx]) for r in rows) < 1e-6

    def test_constant_outputs_constant_rows(self, tmp_path):
        text = SMALL_TRAJ.replace("x = sinusoid freq=1/4 amp_cos=-2 offset=2", "x = constant value=0") \
                         .replace("y = sinusoid freq=1/5 amp_sin=2.5", "y = constant value=0") \
                         .replace("z = sinusoid freq=1/7 amp_cos=1.5", "z = constant value=0")
        cfg = tmp_path / "const.ini"
        cfg.write_text(text)
        out = tmp_path / "plan"
        assert main(["plan", "--config", str(cfg), "--out-dir", str(out)]) == 0
        header, rows = read_csv(out / "plan.csv")
        q_cols = [i for i, h in enumerate(header) if h.startswith("q")]
        first = [rows[0][i] for i in q_cols]
        for row in rows[1:]:
            assert [row[i] for i in q_cols] == first

    def test_zero_tension_exit_2(self, tmp_path, capsys):
        text = SMALL_TRAJ.replace("x = constant value=1.1", "x = constant value=0") \
                         .replace("z = constant value=-2.2", "z = constant value=0")
        cfg = tmp_path / "sing.ini"
        cfg.write_text(text)
        code = main(["plan", "--config", str(cfg), "--out-dir", str(tmp_path)])
        assert code == 2
        assert "tension" in capsys.readouterr().err.lower()


class TestLinearizeCommand:
    def test_hover_matrices_time_constant(self, setpoint_cfg, tmp_path):
        out = tmp_path / "lin"
        code = main(["linearize", "--config", str(setpoint_cfg), "--out-dir", str(out),
                     "--times", "0.0,0.5"])
        assert code == 0
        text = (out / "linearization.txt").read_text()
        blocks = {}
        current = None
        for line in text.splitlines():
            if line.startswith("#"):
                current = line
                blocks.setdefault(current, [])
            else:
                blocks[current].append(line)
        a_keys = [k for k in blocks if " A " in k]
        assert len(a_keys) == 2
        assert blocks[a_keys[0]] == blocks[a_keys[1]]
        assert text.startswith("# error-state blocks:")


class TestGainPersistence:
    def test_synth_then_simulate_bit_identical(self, setpoint_cfg, tmp_path):
        gains_dir = tmp_path / "gains"
        assert main(["lqr-synth", "--config", str(setpoint_cfg), "--out-dir", str(gains_dir)]) == 0
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["simulate", "--config", str(setpoint_cfg), "--out-dir", str(out_a)]) == 0
        assert main(["simulate", "--config", str(setpoint_cfg), "--out-dir", str(out_b),
                     "--gain-file", str(gains_dir / "gains.npz")]) == 0
        assert (out_a / "log.csv").read_bytes() == (out_b / "log.csv").read_bytes()


class TestBenchmarkCommand:
    def test_tiny_benchmark_csv(self, tmp_path):
        cfg = tmp_path / "bench.ini"
        cfg.write_text(
            "[hose]\nlinks = 2\nlink_length = 0.5\nnode_mass = 0.3\n"
            "[quadrotor.0]\nmass = 0.85\ninertia = 0.0557, 0.0557, 0.1050\n"
            "[quadrotor.2]\nmass = 0.85\ninertia = 0.0557, 0.0557, 0.1050\n"
            "[benchmark]\nn_list = 2, 3\nduration = 0.05\ndt = 0.005\n"
        )
        out = tmp_path / "bench"
        assert main(["benchmark", "--config", str(cfg), "--out-dir", str(out)]) == 0
        header, rows = read_csv(out / "benchmark.csv")
        assert header == ["n", "wall_seconds"]
        assert [int(r[0]) for r in rows] == [2, 3]


def test_bundled_configs_resolve():
    from flexhose.cli import _resolve_config

    for name in ("setpoint_2quad", "setpoint_3quad", "traj_2quad", "benchmark",
                 "setpoint_2quad_ff", "tethered_1quad"):
        path = _resolve_config(name)
        assert path.exists()
        cfg = load_config(path)
        assert cfg.params.n >= 1
