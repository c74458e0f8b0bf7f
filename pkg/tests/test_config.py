import pytest
from hypothesis import given
from hypothesis import strategies as st

from brwcover.cli import build_parser, load_config
from brwcover.config import COMMANDS, ConfigError, ExperimentConfig, parse_value

floats = st.floats(allow_nan=False, allow_infinity=False, width=64)
names = st.text(st.characters(whitelist_categories=("Ll", "Lu", "Nd"), whitelist_characters=":_/.-"), min_size=1, max_size=12)

configs = st.builds(
    ExperimentConfig,
    command=st.sampled_from(COMMANDS),
    d=st.integers(2, 9),
    dist=st.one_of(st.just(""), st.sampled_from(["det:3", "poisson:3", "geom:1", "table:0=1/2,6=1/2"])),
    seed=st.integers(0, 2**64 - 1),
    replicas=st.integers(1, 10**9),
    threads=st.integers(1, 64),
    out=names,
    r=st.lists(st.integers(0, 50), min_size=1, max_size=5).map(tuple),
    k=st.integers(0, 8),
    L=st.integers(0, 500),
    gamma=st.lists(floats, min_size=1, max_size=4).map(tuple),
    strict_exact=st.booleans(),
    slack=st.integers(0, 200),
    block=st.integers(0, 10**6),
    M=floats,
    delta=floats,
    a=floats,
    mode=st.sampled_from(["1d", "tree"]),
)


class TestRoundTrip:
    @given(configs)
    def test_identity(self, cfg):
        assert ExperimentConfig.from_text(cfg.to_text()) == cfg

    def test_default(self):
        cfg = ExperimentConfig()
        assert ExperimentConfig.from_text(cfg.to_text()) == cfg
        assert cfg.dist_spec == "det:3"

    def test_comments_and_dashes(self):
        cfg = ExperimentConfig.from_text("# note\n\nk-band = 4\nstrict-exact=yes\n")
        assert cfg.k_band == 4 and cfg.strict_exact


class TestErrors:
    @pytest.mark.parametrize(
        "text",
        ["command=walk", "seed=-1", f"seed={2**64}", "d=1", "replicas=0", "threads=0", "nonsense", "colour=red", "strict_exact=maybe"],
    )
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text(text)

    def test_bad_number(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_text("d=three")

    def test_parse_value(self):
        assert parse_value("r", "4,8") == (4, 8)
        assert parse_value("gamma", "0.5") == (0.5,)


class TestFlags:
    def test_flags_override_file(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("seed=5\nreplicas=10\nr=3,4\n")
        args = build_parser().parse_args(["cover", "--config", str(p), "--seed", "9", "--strict-exact"])
        cfg = load_config(args)
        assert cfg.seed == 9 and cfg.replicas == 10 and cfg.r == (3, 4) and cfg.strict_exact

    def test_subcommand_wins(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("command=cover\n")
        cfg = load_config(build_parser().parse_args(["hit", "--config", str(p)]))
        assert cfg.command == "hit"

    def test_multi_value_flags(self):
        cfg = load_config(build_parser().parse_args(["pakes", "--gamma", "0.5,1,2", "--r", "4,8"]))
        assert cfg.gamma == (0.5, 1.0, 2.0) and cfg.r == (4, 8)
