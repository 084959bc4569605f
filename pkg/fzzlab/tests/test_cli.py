import json
import math
from types import SimpleNamespace

import pytest

from src import cli
from src.report import deterministic_report
from verifier import load_suite


def fake_loader(verdicts):
    def run_suite(config):
        return [
            deterministic_report(f"check_{k}", {"gamma": config.gamma}, 1.0, 1.0 if ok else 2.0, 1e-10)
            for k, ok in enumerate(verdicts)
        ]

    def dump_samples(config):
        return ("id", "value"), iter([(0, 0.5), (1, 0.25)]), {"seed": config.seed}

    suite = SimpleNamespace(run_suite=run_suite, dump_samples=dump_samples)
    return lambda name: suite


def test_parser_commands():
    parser = cli.build_parser()
    args = parser.parse_args(["eval", "u0_bar", "--gamma", "1", "--alpha", "2"])
    assert args.command == "eval" and args.target == "u0_bar" and args.alpha == 2.0
    args = parser.parse_args(["verify", "all", "--tol", "laplace=1e-6", "--tol", "ks_alpha=0.001"])
    assert args.tolerances == [("laplace", 1e-6), ("ks_alpha", 0.001)]
    args = parser.parse_args(["dump", "cone", "--path", "x.csv", "--n", "10"])
    assert args.dump_path == "x.csv" and args.n_samples == 10


@pytest.mark.parametrize("argv", [
    ["eval", "nonsense"],
    ["verify", "cone", "--tol", "laplace"],
    ["verify", "cone", "--tol", "unknown=1"],
    ["verify", "cone", "--tol", "laplace=-1"],
    ["verify", "cone", "--n", "0"],
    ["dump", "identities"],
    ["verify", "identities", "--gamma-grid", "0.8,one"],
    ["verify", "identities", "--gamma-grid", ","],
])
def test_usage_errors_exit_2(argv):
    assert cli.main(argv, load_suite=fake_loader([True]), environ={}) == cli.EXIT_USAGE


def test_gamma_grid_option():
    parser = cli.build_parser()
    config = cli.config_from_args(parser.parse_args(["verify", "identities", "--gamma-grid"]), environ={})
    assert config.gamma_grid == (0.8, 1.0, 1.2, 1.4)
    config = cli.config_from_args(parser.parse_args(["verify", "identities", "--gamma-grid", "0.9,1.1"]), environ={})
    assert config.gamma_grid == (0.9, 1.1)
    assert config.echo()["gamma_grid"] == (0.9, 1.1)
    config = cli.config_from_args(parser.parse_args(["verify", "identities"]), environ={})
    assert config.gamma_grid == ()
    assert "gamma_grid" not in config.echo()


def test_resolve_threads():
    assert cli.resolve_threads(3, {cli.THREADS_ENV: "8"}) == 3
    assert cli.resolve_threads(None, {cli.THREADS_ENV: "8"}) == 8
    assert cli.resolve_threads(None, {}) >= 1
    with pytest.raises(cli.ConfigError):
        cli.resolve_threads(None, {cli.THREADS_ENV: "many"})
    with pytest.raises(cli.ConfigError):
        cli.resolve_threads(None, {cli.THREADS_ENV: "0"})


def test_run_config_defaults_and_overrides():
    args = cli.build_parser().parse_args(["verify", "gmc", "--preset", "bulk-small", "--tol", "bulk_moment=0.2"])
    config = cli.config_from_args(args, environ={cli.THREADS_ENV: "2"})
    assert config.threads == 2
    assert config.tolerance("bulk_moment") == 0.2
    assert config.tolerance("u0_bar") == 0.05
    assert config.preset_value("gmc", "lattice") == "bulk-small"
    assert config.samples("gmc") == 2000
    # a gmc preset leaves the cone suite on its default
    assert config.preset_for("cone") == "cone-small"
    echo = config.echo()
    assert echo["tolerances"] == {"bulk_moment": 0.2}
    assert "alpha" not in echo


def test_preset_must_match_suite():
    args = cli.build_parser().parse_args(["verify", "cone", "--preset", "bulk-small"])
    with pytest.raises(cli.ConfigError):
        cli.config_from_args(args, environ={})
    assert cli.main(["verify", "cone", "--preset", "bulk-small"], load_suite=fake_loader([True]), environ={}) == 2


def test_eval_u0_bar(capsys):
    code = cli.main(["eval", "u0_bar", "--gamma", "1", "--alpha", "2"], environ={})
    assert code == cli.EXIT_PASS
    payload = json.loads(capsys.readouterr().out)
    assert payload["formula"] == "u0_bar"
    assert payload["value"] == pytest.approx(math.pi, rel=1e-12)
    assert payload["config"]["gamma"] == 1.0


def test_eval_mot_variance_diagnostics(capsys):
    assert cli.main(["eval", "mot_variance", "--gamma", "1.4142135623730951"], environ={}) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["value"] == pytest.approx(2.0, rel=1e-12)
    assert payload["diagnostics"]["from_ratio"] == pytest.approx(2.0, rel=1e-10)


def test_eval_u_fzz_reports_branch(capsys):
    assert cli.main(["eval", "u_fzz", "--gamma", "1", "--alpha", "2.1", "--mu-b", "0.3"], environ={}) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["diagnostics"]["branch"] == "real-s"
    assert math.isfinite(payload["value"])


def test_eval_pole_exits_2(capsys):
    assert cli.main(["eval", "u_fzz", "--gamma", "1", "--alpha", "2"], environ={}) == cli.EXIT_USAGE
    assert "Gamma pole" in capsys.readouterr().err


def test_eval_needs_alpha(capsys):
    assert cli.main(["eval", "gmc_moment_h"], environ={}) == cli.EXIT_USAGE
    assert "--alpha" in capsys.readouterr().err


def test_eval_area_law(capsys):
    assert cli.main(["eval", "area_law", "--alpha", "2"], environ={}) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["diagnostics"]["provenance"] == "alpha-insertion"
    assert payload["value"] == pytest.approx(2.0 * math.sqrt(2.0))


def test_verify_exit_codes_and_json_lines(capsys, tmp_path):
    out = tmp_path / "reports.jsonl"
    code = cli.main(["verify", "cone", "--seed", "5", "--out", str(out)], load_suite=fake_loader([True, True]), environ={})
    assert code == cli.EXIT_PASS
    captured = capsys.readouterr()
    lines = [json.loads(l) for l in captured.out.splitlines()]
    assert [l["check"] for l in lines] == ["check_0", "check_1"]
    assert lines[0]["notes"]["config"]["seed"] == 5
    assert "RESULT: 2/2 checks passed" in captured.err
    assert len(out.read_text().splitlines()) == 2

    code = cli.main(["verify", "all"], load_suite=fake_loader([True, False]), environ={})
    assert code == cli.EXIT_FAIL
    captured = capsys.readouterr()
    assert len(captured.out.splitlines()) == 6
    assert "RESULT: 3/6 checks passed" in captured.err


def test_verify_unwritable_out_exits_3(tmp_path):
    code = cli.main(["verify", "cone", "--out", str(tmp_path)], load_suite=fake_loader([True]), environ={})
    assert code == cli.EXIT_IO


def test_missing_suite_exits_2():
    assert cli.main(["verify", "cone"], load_suite=lambda name: None, environ={}) == cli.EXIT_USAGE


def test_dump_with_sidecar(tmp_path):
    path = tmp_path / "samples.csv"
    code = cli.main(["dump", "gmc", "--path", str(path), "--seed", "3"], load_suite=fake_loader([True]), environ={})
    assert code == cli.EXIT_PASS
    assert path.read_text().splitlines() == ["id,value", "0,0.5", "1,0.25"]
    meta = json.loads((tmp_path / "samples.csv.json").read_text())
    assert meta["rows"] == 2 and meta["seed"] == 3
    assert meta["config"]["command"] == "dump"


def test_loader_finds_the_suites():
    for name in ("identities", "cone", "gmc"):
        assert hasattr(load_suite(name), "run_suite")
    assert load_suite("nonsense") is None


def test_cone_dump_end_to_end(tmp_path):
    path = tmp_path / "cone.csv"
    argv = ["dump", "cone", "--path", str(path), "--n", "200", "--seed", "1", "--threads", "2"]
    assert cli.main(argv, load_suite=load_suite, environ={}) == cli.EXIT_PASS
    rows = path.read_text().splitlines()
    assert rows[0] == "stream_id,path_id,A,L,weight,exit_side"
    assert len(rows) == 201
    assert rows[1].endswith(",ray")
    meta = json.loads((tmp_path / "cone.csv.json").read_text())
    assert meta["rows"] == 200
    assert meta["trials"] >= 200


@pytest.mark.slow
def test_identities_suite_passes(capsys):
    assert cli.main(["verify", "identities", "--gamma", "1"], load_suite=load_suite, environ={}) == cli.EXIT_PASS
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert {l["check"] for l in lines} >= {"special1", "u_consistency", "series_route", "selberg_n1"}


@pytest.mark.slow
def test_identities_suite_gamma_grid(capsys):
    argv = ["verify", "identities", "--gamma-grid"]
    assert cli.main(argv, load_suite=load_suite, environ={}) == cli.EXIT_PASS
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    consistency = [l for l in lines if l["check"] == "u_consistency"]
    assert len(consistency) == 4 * 5 * 3
    assert {l["params"]["gamma"] for l in consistency} == {0.8, 1.0, 1.2, 1.4}
    assert {l["params"]["branch"] for l in consistency} == {"real-s", "imaginary-s", "degenerate"}
    assert len([l for l in lines if l["check"] == "truncated_u"]) == 4 * 5 * 2
    assert len([l for l in lines if l["check"] == "special1"]) == 20
    assert len([l for l in lines if l["check"] == "special2"]) == 20
