"""Configuration, CLI commands, caching and pipeline orchestration."""

import json

import numpy as np
import pytest

from bcgkit import cli
from bcgkit.config import load_config, parse_config
from bcgkit.errors import InvalidInputError, InvalidParameterError
from bcgkit import pipeline
from bcgkit.pipeline import detect_recording, run_report, run_sweep


@pytest.fixture(scope="module")
def demo_env(tmp_path_factory):
    """Demo corpus plus a config file, built once via the CLI."""
    root = tmp_path_factory.mktemp("demo_env")
    assert cli.main(["synth", "--builtin", "demo", "--out", str(root / "corpus")]) == 0
    cfg = root / "config.txt"
    cfg.write_text(
        f"paths.corpus_dir={root / 'corpus'}\n"
        f"paths.out_dir={root / 'out'}\n"
        "detectors=tm,alternate\n"
    )
    return root


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.thresholds.t_mc == 0.75
        assert cfg.thresholds.t_rc == 0.20
        assert (cfg.thresholds.w1, cfg.thresholds.w2) == (1.0, 3.0)
        assert cfg.thresholds.epoch_ms == 12000.0
        assert cfg.filter_low_hz == 1.0 and cfg.filter_high_hz == 10.0
        assert cfg.filter_order == 3
        assert cfg.detectors == ("tm", "alternate")
        assert len(cfg.sweep_t_mc) == len(cfg.sweep_t_rc) == 8

    def test_section_prefixes(self, tmp_path):
        text = (
            "thresholds.t_mc=0.8\n"
            "tm.refine_gate=0.5\n"
            "filter.order=4\n"
            "sweep.weights=2:1,1:2\n"
            "detectors=tm,alternate,dl\n"
            "dl.command=dl-detector\n"
            "dl.model=/tmp/model\n"
        )
        cfg = parse_config(text, base_dir=tmp_path)
        assert cfg.thresholds.t_mc == 0.8
        assert cfg.tm.refine_gate == 0.5
        assert cfg.filter_order == 4
        assert cfg.sweep_weights == ((2.0, 1.0), (1.0, 2.0))
        assert cfg.detectors == ("tm", "alternate", "dl")
        assert cfg.dl_command == "dl-detector"

    def test_unknown_key_rejected(self):
        with pytest.raises(InvalidParameterError):
            parse_config("thresholds.bogus=1\n")
        with pytest.raises(InvalidParameterError):
            parse_config("nonsense=1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(InvalidParameterError):
            parse_config("workers=1\nworkers=2\n")

    def test_bad_weight_pair(self):
        with pytest.raises(InvalidParameterError):
            parse_config("sweep.weights=1:2:3\n")

    def test_unknown_detector(self):
        with pytest.raises(InvalidParameterError):
            parse_config("detectors=tm,magic\n")


class TestCliPipeline:
    def test_all_commands_succeed(self, demo_env):
        cfg = str(demo_env / "config.txt")
        for command in ("detect", "score", "fuse", "eval", "sweep", "report"):
            assert cli.main([command, "--config", cfg]) == 0, command

        out = demo_env / "out"
        labels = [e["label"] for e in
                  json.loads((demo_env / "corpus" / "manifest.json").read_text())]
        for label in labels:
            for det in ("tm", "alternate"):
                assert (out / "annotations" / f"{label}.{det}.json").exists()
                assert (out / "scores" / f"{label}.{det}.json").exists()
            assert (out / "hybrid" / f"{label}.hybrid.json").exists()
            assert (out / "hybrid" / f"{label}.audit.json").exists()
            assert (out / "eval" / f"{label}.json").exists()
            assert (out / "report" / f"f_trace.{label}.csv").exists()
        assert (out / "eval" / "summary.json").exists()
        assert (out / "sweep" / "thresholds.txt").exists()
        assert (out / "sweep" / "weights.csv").exists()
        assert (out / "report" / "stratified.json").exists()
        assert (out / "report" / "error_hist.csv").exists()

    def test_score_records_have_contract_fields(self, demo_env):
        out = demo_env / "out"
        sample = sorted((out / "scores").glob("*.tm.json"))[0]
        records = json.loads(sample.read_text())
        assert records
        assert set(records[0]) == {"epoch_start_ms", "epoch_end_ms", "detector",
                                   "c1", "c2", "F", "acceptable"}

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["detect"])  # missing --config
        assert err.value.code == 1

    def test_unknown_command_exit_code(self):
        with pytest.raises(SystemExit) as err:
            cli.main(["frobnicate"])
        assert err.value.code == 1

    def test_missing_config_is_data_error(self, tmp_path):
        assert cli.main(["detect", "--config", str(tmp_path / "none.txt")]) == 2

    def test_missing_corpus_is_data_error(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text(f"paths.corpus_dir={tmp_path / 'nowhere'}\n"
                       f"paths.out_dir={tmp_path / 'out'}\n")
        assert cli.main(["detect", "--config", str(cfg)]) == 2

    def test_missing_dl_dependency_exit_code(self, demo_env, tmp_path):
        cfg = tmp_path / "dl.txt"
        cfg.write_text(
            f"paths.corpus_dir={demo_env / 'corpus'}\n"
            f"paths.out_dir={tmp_path / 'out'}\n"
            "detectors=tm,alternate,dl\n"
            "dl.command=/no/such/executable\n"
            "dl.model=/no/such/model\n"
        )
        assert cli.main(["detect", "--config", str(cfg)]) == 3

    def test_single_detector_fuse_fails_with_contract_error(self, demo_env, tmp_path):
        cfg = tmp_path / "single.txt"
        cfg.write_text(
            f"paths.corpus_dir={demo_env / 'corpus'}\n"
            f"paths.out_dir={tmp_path / 'out'}\n"
            "detectors=tm\n"
        )
        assert cli.main(["fuse", "--config", str(cfg)]) == 2

    def test_synth_with_spec_file(self, tmp_path):
        spec = tmp_path / "one.spec"
        spec.write_text("label=only\nduration_s=5\nseed=3\n")
        assert cli.main(["synth", "--spec", str(spec), "--out", str(tmp_path / "c")]) == 0
        manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
        assert [e["label"] for e in manifest] == ["only"]

    def test_synth_bad_spec_is_data_error(self, tmp_path):
        spec = tmp_path / "bad.spec"
        spec.write_text("label=x\nnot a key value\n")
        assert cli.main(["synth", "--spec", str(spec), "--out", str(tmp_path / "c")]) == 2


class TestCachingAndHelpers:
    def test_detection_cache_reused(self, demo_env, monkeypatch):
        config = load_config(demo_env / "config.txt")
        recordings = pipeline.load_corpus(config)
        calls = {"n": 0}
        real = pipeline.tm_detect

        def counting(trace, cfg):
            calls["n"] += 1
            return real(trace, cfg)

        monkeypatch.setattr(pipeline, "tm_detect", counting)
        detect_recording(config, recordings[0])  # cache hit from earlier CLI run
        assert calls["n"] == 0
        detect_recording(config, recordings[0], use_cache=False)
        assert calls["n"] == 1

    def test_cache_key_changes_with_params(self, demo_env, tmp_path):
        from dataclasses import replace
        config = load_config(demo_env / "config.txt")
        recordings = pipeline.load_corpus(config)
        base = pipeline._cache_path(config, recordings[0], "tm")
        changed = replace(config, tm=replace(config.tm, refine_gate=0.5))
        assert pipeline._cache_path(changed, recordings[0], "tm") != base

    def test_sweep_requires_paired_grids(self, demo_env, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text(
            f"paths.corpus_dir={demo_env / 'corpus'}\n"
            f"paths.out_dir={tmp_path / 'out'}\n"
            "sweep.t_mc=0.6,0.7\n"
            "sweep.t_rc=0.4\n"
        )
        with pytest.raises(InvalidParameterError):
            run_sweep(load_config(cfg))

    def test_empty_report_warns_not_fails(self, tmp_path):
        cfg = parse_config(
            f"paths.corpus_dir={tmp_path / 'nowhere'}\n"
            f"paths.out_dir={tmp_path / 'out'}\n"
        )
        result = run_report(cfg)
        assert result["empty"]
        assert (tmp_path / "out" / "report" / "report.txt").exists()

    def test_workers_parallel_detection_matches_serial(self, demo_env):
        from dataclasses import replace
        config = load_config(demo_env / "config.txt")
        recordings = pipeline.load_corpus(config)
        serial = pipeline.detect_corpus(config, recordings)
        parallel = pipeline.detect_corpus(replace(config, workers=2), recordings)
        for label in serial:
            for det in serial[label]:
                assert np.array_equal(serial[label][det].peak_times_ms,
                                      parallel[label][det].peak_times_ms)

    def test_unreadable_signal_file_names_it(self, demo_env, tmp_path):
        import shutil
        corpus = tmp_path / "corpus"
        shutil.copytree(demo_env / "corpus", corpus)
        manifest = json.loads((corpus / "manifest.json").read_text())
        victim = corpus / manifest[0]["signal_path"]
        victim.write_text("no header at all\n1.0\n")
        cfg = parse_config(f"paths.corpus_dir={corpus}\npaths.out_dir={tmp_path/'out'}\n")
        with pytest.raises(InvalidInputError) as err:
            pipeline.load_corpus(cfg)
        assert manifest[0]["signal_path"] in str(err.value)


class TestSweepExamples:
    def test_single_row_hybrid_beats_ungated_solos(self, standard_bundle, tmp_path):
        """At the default (0.75, 0.20) row the hybrid must not trail either
        solo detector evaluated without confidence gating."""
        config = parse_config(
            f"paths.out_dir={tmp_path / 'out'}\n"
            "sweep.t_mc=0.75\n"
            "sweep.t_rc=0.20\n"
        )
        result = run_sweep(config, standard_bundle["recordings"],
                           standard_bundle["detections"])
        assert len(result["threshold_rows"]) == 1
        hybrid = result["threshold_rows"][0]["methods"]["hybrid"]
        for name in ("tm", "alternate"):
            assert hybrid.e_abs_ms <= result["baseline"][name].e_abs_ms

    def test_hybrid_coverage_bounded_by_full_recording_solos(self, standard_bundle,
                                                             tmp_path):
        """With detectors reporting everywhere, fusion can only discard."""
        config = parse_config(f"paths.out_dir={tmp_path / 'out'}\n")
        result = run_sweep(config, standard_bundle["recordings"],
                           standard_bundle["detections"])
        solo_cov = max(result["baseline"][n].coverage_pct for n in ("tm", "alternate"))
        for row in result["threshold_rows"]:
            assert row["methods"]["hybrid"].coverage_pct <= solo_cov + 1e-9
