import json

import pytest

from ensd.confidence import read_nbest_file
from ensd.dataset import Partition, read_manifest
from ensd.errors import ConfigError
from ensd.experiment import (
    LABELED,
    POOL,
    MetricsReport,
    Workdir,
    decode_experts,
    evaluate,
    generate,
    partition_speakers,
    read_jsonl,
    run_pipeline,
    train_student,
)
from ensd.model import read_checkpoint
from ensd.utils import setup_args, config_hash

pytestmark = pytest.mark.slow

POLICIES = ["best_expert", "all_experts", "rover", "smart_weighter", "oracle"]


@pytest.fixture
def pipeline_args(make_config):
    args = make_config("pipeline")
    setup_args(args)
    return args


def test_pipeline_writes_a_complete_report(pipeline_args):
    report = run_pipeline(pipeline_args)
    workdir = Workdir.from_args(pipeline_args)

    assert sorted(report.policies) == sorted(POLICIES)
    assert report.config_hash == config_hash(pipeline_args)
    models = {row.model for row in report.rows}
    assert {f"expert{k}" for k in (1, 2, 3)} <= models
    assert {f"student_{p}" for p in POLICIES} <= models
    assert {"weighter", "uniform_weights", "oracle_weights", "rover_transcripts"} <= models

    for split in pipeline_args.evaluate.splits:
        oracle = report.get(split, "oracle_weights")
        uniform = report.get(split, "uniform_weights")
        assert oracle.weighted_wer <= uniform.weighted_wer + 1e-12
        assert oracle.accuracy == 1.0
        assert 0.0 <= report.get(split, "weighter").accuracy <= 1.0

    loaded = MetricsReport.load(workdir.reports / "metrics.json")
    assert loaded == report
    assert (workdir.reports / "metrics.csv").read_text().startswith("split,model,wer,accuracy,weighted_wer\n")

    # evaluating the same checkpoints again reproduces the report
    assert evaluate(pipeline_args) == report


def test_pipeline_artifacts(pipeline_args):
    run_pipeline(pipeline_args)
    workdir = Workdir.from_args(pipeline_args)

    partition = Partition.load(workdir.partition)
    train_speakers = {u.speaker_id for u in read_manifest(workdir.manifest(LABELED), splits=["train"])}
    partition.validate(sorted(train_speakers))

    pool = read_manifest(workdir.manifest(POOL))
    for k in (1, 2, 3):
        nbests = list(read_nbest_file(workdir.nbest(POOL, k)))
        assert sorted(nb.utt_id for nb in nbests) == sorted(u.utt_id for u in pool)
        assert all(len(nb.entries) <= pipeline_args.decode.n for nb in nbests)
        header, _ = read_checkpoint(workdir.expert(k))
        assert header["kind"] == "transducer"
        assert header["step"] == pipeline_args.optim.total_steps

    for policy in POLICIES:
        records = read_jsonl(workdir.supervision(policy))
        assert len(records) == len(pool)
        assert all(abs(sum(r["weights"]) - 1.0) < 1e-6 for r in records)
    assert len(read_jsonl(workdir.fused(POOL))) == len(pool)


def test_stages_are_deterministic(make_config):
    args = make_config("pipeline")
    setup_args(args)
    generate(args)
    workdir = Workdir.from_args(args)
    manifest = workdir.manifest(LABELED).read_bytes()
    first = partition_speakers(args)

    generate(args)
    assert workdir.manifest(LABELED).read_bytes() == manifest
    assert partition_speakers(args) == first


def test_student_needs_decoded_pool(pipeline_args):
    generate(pipeline_args)
    with pytest.raises(ConfigError):
        train_student(pipeline_args, "all_experts")


def test_decode_needs_experts(pipeline_args):
    generate(pipeline_args)
    partition_speakers(pipeline_args)
    with pytest.raises(ConfigError):
        decode_experts(pipeline_args)


def test_random_partition_is_balanced(make_config):
    args = make_config("cluster", overrides=["experts.method=random"])
    generate(make_config("gen_corpus"))
    partition = partition_speakers(args)
    sizes = partition.sizes()
    assert max(sizes) - min(sizes) <= 1
    assert json.loads(Workdir.from_args(args).partition.read_text())["method"] == "random"


def test_rerun_reproduces_the_metrics_csv(make_config, tmp_path):
    csvs = []
    for name in ("a", "b"):
        args = make_config("pipeline", overrides=[f"workdir={tmp_path / name}"])
        setup_args(args)
        run_pipeline(args)
        csvs.append((Workdir.from_args(args).reports / "metrics.csv").read_bytes())
    assert csvs[0] == csvs[1]


def test_pipeline_weighs_rover_as_an_extra_expert(make_config):
    args = make_config("pipeline", overrides=["experts.include_rover=true", "pipeline.policies=[smart_weighter]"])
    setup_args(args)
    report = run_pipeline(args)
    workdir = Workdir.from_args(args)

    header, _ = read_checkpoint(workdir.weighter)
    assert header["arch"]["num_experts"] == 4
    records = read_jsonl(workdir.supervision("smart_weighter"))
    assert all(len(r["weights"]) == 4 for r in records)
    for split in args.evaluate.splits:
        assert report.get(split, "oracle_weights").accuracy == 1.0
        assert 0.0 <= report.get(split, "rover_transcripts").wer
