import json
import subprocess
import sys

import pytest

from dipolecloud import cli
from dipolecloud.errors import ConfigError

BASE = """master_seed = 5
realizations = 2
[cloud]
n_atoms = 30
sigma_um = [0.8, 0.8, 2.0]
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_decay_outputs_and_header(tmp_path):
    cfg = write(tmp_path, BASE.replace("sigma_um = [0.8, 0.8, 2.0]",
                                       "sigma_um = [[0.8, 0.8, 2.0], [1.0, 1.0, 1.0]]"))
    assert cli.main(["decay", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "decay.csv").read_text()
    header = [line for line in text.splitlines() if line.startswith("#")]
    assert any(line.startswith("# config_sha256: ") for line in header)
    seeds_line = next(line for line in header if "realization_seeds" in line)
    assert len(seeds_line.split(":")[1].split()) == 4
    assert "t_gamma,p_td_0,p_td_1" in text
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert len(summary["summary"]["fits"]) == 2


def test_overrides_change_seed_and_hash(tmp_path):
    cfg = write(tmp_path, BASE)
    cli.main(["spectrum", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["spectrum", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "6",
              "--realizations", "1"])
    a = json.loads((tmp_path / "a" / "summary.json").read_text())
    b = json.loads((tmp_path / "b" / "summary.json").read_text())
    assert a["config_sha256"] != b["config_sha256"]
    assert b["master_seed"] == 6 and len(b["realization_seeds"]) == 1
    assert (tmp_path / "a" / "histogram_fc.csv").exists()


def test_sweep_rows(tmp_path):
    cfg = write(tmp_path, BASE + """[sweep]
experiment = "spectrum"
key = "cloud.sigma_z_um"
values = [1.0, 2.0, 4.0]
fixed_volume_um3 = 2.0
""")
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    rows = [l for l in (tmp_path / "s" / "sweep.csv").read_text().splitlines()
            if not l.startswith("#")]
    assert rows[0].startswith("cloud.sigma_z_um,")
    assert len(rows) == 4


@pytest.mark.parametrize("text,key", [
    (BASE.replace("n_atoms = 30", "n_atoms = 0"), "cloud"),
    (BASE.replace("n_atoms = 30", "n_atoms = 30\ncolour = 1"), "cloud.colour"),
    (BASE.replace("realizations = 2", "realizations = 0"), "realizations"),
    (BASE + "[grid]\nbogus = 1\n", "grid.bogus"),
    (BASE.replace("[cloud]", "[cloud]\ncoupling = \"magic\""), "cloud.coupling"),
    (BASE + "[sweep]\nexperiment = \"decay\"\nkey = [\"a\", \"b\"]\nvalues = [1]\n", "sweep.key"),
])
def test_config_errors_name_key(tmp_path, text, key):
    with pytest.raises(ConfigError) as err:
        cli.parse_config(cli.load_config(write(tmp_path, text)),
                         "sweep" if "[sweep]" in text else "decay")
    assert err.value.key == key


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["decay", "--config", str(tmp_path / "missing.toml")]) == 2
    assert "missing.toml" in capsys.readouterr().err
    dense = BASE.replace("n_atoms = 30", "n_atoms = 400")
    bad = write(tmp_path, dense.replace("sigma_um = [0.8, 0.8, 2.0]",
                                        "sigma_um = [0.02, 0.02, 0.02]\nmin_separation_um = 0.02"))
    with pytest.warns(UserWarning):
        code = cli.main(["decay", "--config", bad, "--out", str(tmp_path / "x")])
    assert code == 3
    assert "seed=" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, BASE)
    res = subprocess.run([sys.executable, "-m", "dipolecloud", "decay", "--config", cfg,
                          "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "gamma_S" in res.stdout
