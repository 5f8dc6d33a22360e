import csv
import json
import math

import pytest

from eemimo.cli import CSV_HEADER, ConfigError, main, parse_config
from eemimo.efficiency import eff, utility
from eemimo.model import default_params


def test_empty_config_defaults():
    cfg = parse_config("")
    assert (cfg.n_tx, cfg.packet_len, cfg.noise_psd) == (4, 120, 1e-9)
    assert cfg.p_max_w == pytest.approx(10 ** -2.5)
    assert cfg.K == (2, 4, 6, 8, 10) and cfg.n_rx == (4, 8)


@pytest.mark.parametrize("text,key", [
    ("trials = -1", "trials"),
    ("trials = 1.5", "trials"),
    ("K = [2, 0]", "K"),
    ("seed = -3", "seed"),
    ("games = ['mf_power', 'x']", "games"),
    ("[system]\nnoise_psd = 0", "system.noise_psd"),
    ("[system]\nchannel_model = 'rician'", "system.channel_model"),
    ("[solver]\ntol = -1e-6", "solver.tol"),
    ("[output]\nformats = ['xml']", "output.formats"),
    ("[system]\nn_tx = 'four'", "system.n_tx"),
])
def test_bad_values_name_their_key(text, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(text)


def test_unknown_keys_listed():
    with pytest.raises(ConfigError) as info:
        parse_config("bogus = 1\n[system]\nfoo = 2\n[extra]\nx = 1\n")
    msg = str(info.value)
    assert "bogus" in msg and "system.foo" in msg and "extra" in msg


def test_cross_field_checks():
    with pytest.raises(ConfigError):
        parse_config("[system]\nd_min = 500.0\nd_max = 100.0")
    with pytest.raises(ConfigError):
        parse_config("K = [2, 3]\n[system]\ndistances = [50.0, 60.0]")
    with pytest.raises(ConfigError):
        parse_config("[system]\npacket_len = 1")
    with pytest.raises(ConfigError):
        parse_config("not toml ===")


def test_round_trip():
    text = "K = [2,4,6,8,10]\nseed = 9\n[system]\np_max_dbw = -20.0\ninfo_len = 100\n"
    cfg = parse_config(text)
    again = parse_config(cfg.to_toml())
    assert again == cfg
    assert again.K == (2, 4, 6, 8, 10)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_consistent_files(tmp_path):
    out = tmp_path / "o"
    assert main(["--k", "2,3", "--nrx", "4", "--trials", "3", "--out", str(out)]) == 0
    rows = _read_csv(out / "summary.csv")
    assert rows[0] == CSV_HEADER
    assert len(rows) == 1 + 4 * 2
    js = json.loads((out / "summary.json").read_text())
    for row, cell in zip(rows[1:], js["cells"]):
        for key, text in zip(CSV_HEADER, row):
            if key == "game":
                assert text == cell[key]
            else:
                assert float(text) == cell[key]
        assert float(row[5]) == pytest.approx(10 * math.log10(float(row[4])), rel=1e-12)
        assert float(row[5]) <= -25.0 + 1e-9
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["seed"] == 0 and "PCG64" in meta["rng"]
    assert all(c["non_converged"] == 0 for c in meta["cells"])


def test_full_default_grid_has_40_rows(tmp_path):
    out = tmp_path / "grid"
    assert main(["--trials", "1", "--out", str(out)]) == 0
    assert len(_read_csv(out / "summary.csv")) == 41


def test_byte_identical_reruns(tmp_path):
    args = ["--k", "2,4", "--nrx", "4,8", "--trials", "3", "--seed", "17"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b"), "--threads", "2"])
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


def test_rerun_from_metadata(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(f"K = [3]\nn_rx = [4]\ntrials = 2\nseed = 5\n[output]\ndir = '{tmp_path / 'a'}'\n")
    assert main(["--config", str(cfg)]) == 0
    meta = json.loads((tmp_path / "a" / "metadata.json").read_text())
    cfg2 = tmp_path / "cfg2.toml"
    cfg2.write_text(meta["config_toml"])
    assert main(["--config", str(cfg2), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_single_report(tmp_path):
    out = tmp_path / "s"
    assert main(["--single", "--k", "3", "--nrx", "4", "--seed", "2", "--out", str(out)]) == 0
    rep = json.loads((out / "single_report.json").read_text())
    params = default_params(3, 4)
    for g in rep["games"].values():
        assert g["converged"] and g["verify_nash"]["ok"]
        for sinr, p, u in zip(g["sinr"], g["powers_w"], g["utility_bits_per_joule"]):
            assert u == utility(sinr, p, params)
            assert sinr == pytest.approx(rep["target_sinr"], rel=1e-4) or p == rep["p_max_w"]
    assert rep["games"]["mmse_beam_power"]["capacity_trace"]


def test_single_user_report(tmp_path):
    out = tmp_path / "s1"
    cfg = tmp_path / "c.toml"
    cfg.write_text("K = [1]\nn_rx = [4]\n[system]\ndistances = [400.0]\n")
    assert main(["--single", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "single_report.json").read_text())
    for g in rep["games"].values():
        p, s = g["powers_w"][0], g["sinr"][0]
        assert s == pytest.approx(rep["target_sinr"], rel=1e-4) or p == rep["p_max_w"]


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("trials = -1\n")
    assert main(["--config", str(bad)]) != 0
    assert "trials" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.toml")]) != 0
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--trials", "1", "--k", "2", "--nrx", "4", "--out", str(blocker / "sub")]) != 0
    assert main(["--games", "nope", "--out", str(tmp_path / "x")]) != 0
