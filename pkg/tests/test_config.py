"""Method grammar and layered configuration."""

import pytest

from htim.config import (MethodSpec, RunConfig, build_config, parse_method)
from htim.errors import ConfigError


class TestMethodGrammar:
    @pytest.mark.parametrize("raw,text,graph", [
        ("re", None, "relational"),
        ("rel", None, "relational"),
        ("relational", None, "relational"),
        ("dw", None, "deepwalk"),
        ("n2v", None, "node2vec"),
        ("tfidf", "tfidf", None),
        ("w2v", "cbow", None),
        ("word2vec", "cbow", None),
        ("ctx-avg", "ctx-average", None),
        ("ctx-max", "ctx-maxpool", None),
        ("ctx-sos", "ctx-sos", None),
        ("re+tfidf", "tfidf", "relational"),
        ("tfidf+re", "tfidf", "relational"),
        ("w2v+n2v", "cbow", "node2vec"),
        ("ctx-max+dw", "ctx-maxpool", "deepwalk"),
    ])
    def test_accepted_forms(self, raw, text, graph):
        spec = parse_method(raw)
        assert spec.text == text and spec.graph == graph
        assert spec.baseline is None

    def test_baselines_stand_alone(self):
        assert parse_method("majority").baseline == "majority"
        assert parse_method("random").baseline == "random"
        with pytest.raises(ConfigError):
            parse_method("majority+re")

    @pytest.mark.parametrize("raw", ["", "+", "re+", "bogus",
                                     "re+dw", "tfidf+w2v"])
    def test_rejected_forms(self, raw):
        with pytest.raises(ConfigError):
            parse_method(raw)

    def test_pooling_property(self):
        assert parse_method("ctx-max").pooling == "maxpool"
        assert parse_method("tfidf").pooling is None

    def test_describe_orders_graph_then_text(self):
        assert parse_method("tfidf+re").describe() == "relational+tfidf"
        assert MethodSpec(baseline="majority").describe() == "majority"


class TestValidation:
    def test_defaults_validate(self):
        RunConfig().validate()

    def test_tweet_level_needs_token_capable_text(self):
        cfg = RunConfig(method="tfidf+re", level="tweet")
        with pytest.raises(ConfigError):
            cfg.validate()
        RunConfig(method="w2v+re", level="tweet").validate()

    def test_mode_tier_coupling(self):
        with pytest.raises(ConfigError):
            RunConfig(mode="cv", tier="sympathizer").validate()
        with pytest.raises(ConfigError):
            RunConfig(mode="transfer", tier="member").validate()
        RunConfig(mode="transfer", tier="sympathizer").validate()

    def test_resolved_mode(self):
        assert RunConfig().resolved_mode() == "cv"
        assert RunConfig(tier="supporter").resolved_mode() == "transfer"

    def test_positivity_checks(self):
        for field, bad in [("folds", 1), ("threads", 0), ("p", 0.0),
                           ("q", -1.0), ("svm_c", 0.0), ("walk_length", 0),
                           ("text_dim", 0)]:
            with pytest.raises(ConfigError):
                RunConfig(**{field: bad}).validate()

    def test_gamma_forms(self):
        RunConfig(svm_gamma="scale").validate()
        RunConfig(svm_gamma=0.7).validate()
        with pytest.raises(ConfigError):
            RunConfig(svm_gamma="auto").validate()
        with pytest.raises(ConfigError):
            RunConfig(svm_gamma=-1.0).validate()


class TestLayering:
    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("# comment line\n"
                        "method = dw\n"
                        "folds = 5\n"
                        "p = 2.0\n"
                        "standardize = true\n")
        cfg = build_config(path, environ={})
        assert cfg.method == "dw"
        assert cfg.folds == 5 and cfg.p == 2.0 and cfg.standardize is True

    def test_env_overrides_file(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("folds = 5\nseed = 1\n")
        cfg = build_config(path, environ={"HTIM_FOLDS": "7"})
        assert cfg.folds == 7 and cfg.seed == 1

    def test_flags_override_env(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("folds = 5\n")
        cfg = build_config(path, environ={"HTIM_FOLDS": "7"},
                           overrides={"folds": 9})
        assert cfg.folds == 9

    def test_unknown_file_key_reports_line(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("folds = 5\nnot_a_key = 1\n")
        with pytest.raises(ConfigError) as err:
            build_config(path, environ={})
        assert "run.conf:2" in str(err.value)

    def test_bad_value_type(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text("folds = soon\n")
        with pytest.raises(ConfigError):
            build_config(path, environ={})

    def test_gamma_coercion_from_strings(self):
        cfg = build_config(environ={"HTIM_SVM_GAMMA": "0.25"})
        assert cfg.svm_gamma == 0.25
        cfg = build_config(environ={"HTIM_SVM_GAMMA": "scale"})
        assert cfg.svm_gamma == "scale"

    def test_bool_coercion(self):
        for raw, expect in [("1", True), ("true", True), ("yes", True),
                            ("0", False), ("false", False), ("no", False)]:
            cfg = build_config(environ={"HTIM_STANDARDIZE": raw})
            assert cfg.standardize is expect, raw
        with pytest.raises(ConfigError):
            build_config(environ={"HTIM_STANDARDIZE": "maybe"})

    def test_result_is_validated(self):
        with pytest.raises(ConfigError):
            build_config(environ={"HTIM_FOLDS": "1"})

    def test_echo_is_stable(self):
        a = RunConfig(method="re+tfidf").echo()
        b = RunConfig(method="re+tfidf").echo()
        assert a == b
        assert a["method"] == "relational+tfidf"
