from __future__ import annotations

from pathlib import Path
from typing import Optional

from accelerate.logging import get_logger
from hydra.utils import to_absolute_path
from omegaconf import DictConfig, OmegaConf
from sklearn.metrics import adjusted_rand_score

from ensd.dataset import (
    Corpus,
    CorpusSpec,
    Partition,
    PartitionMethod,
    Split,
    by_speaker,
    cluster_speakers,
    fit_normalizer,
    generate_corpus,
    random_partition,
    read_corpus_info,
    read_manifest,
    speaker_embedding,
)
from ensd.errors import ConfigError
from ensd.utils import derive_seed
from ensd.weighting.policies import Policy
from .decode import decode_experts
from .evaluate import evaluate
from .experts import train_experts
from .fuse import fuse_corpus
from .report import MetricsReport, relative_improvements, write_improvements
from .student import train_student
from .weighter_training import train_weighter
from .workdir import LABELED, POOL, Workdir

logger = get_logger(__name__)

EMBEDDING_SEED_KEY = 4
CORPUS_SECTIONS = {"corpus": LABELED, "pool": POOL}


def generate(args: DictConfig) -> list[Corpus]:
    """Generate the labeled corpus and the student pool, or one corpus from an external spec file."""
    workdir = Workdir.from_args(args)
    if args.spec:
        spec = CorpusSpec.from_config(OmegaConf.load(to_absolute_path(args.spec)))
        out = to_absolute_path(args.out) if args.out else workdir.corpus_dir(LABELED)
        return [generate_corpus(spec, out)]

    specs = {section: CorpusSpec.from_config(args[section]) for section in args.generate}
    if "corpus" in specs and "pool" in specs:
        mismatch = specs["corpus"].world_mismatch(specs["pool"])
        if mismatch is not None:
            raise ConfigError(f"pool.{mismatch}", "the student pool must share the labeled corpus's "
                                                  f"{mismatch}, got {getattr(specs['pool'], mismatch)} and "
                                                  f"{getattr(specs['corpus'], mismatch)}")
    return [generate_corpus(spec, workdir.corpus_dir(CORPUS_SECTIONS[section])) for section, spec in specs.items()]


def planted_agreement(partition: Partition, corpus_dir: Path) -> Optional[float]:
    """Adjusted Rand index between the partition and the generator's voice groups."""
    try:
        speakers = read_corpus_info(corpus_dir)["speakers"]
    except FileNotFoundError:
        return None
    ids = sorted(partition.assignment)
    return float(adjusted_rand_score([speakers[s]["voice_group"] for s in ids],
                                     [partition.assignment[s] for s in ids]))


def partition_speakers(args: DictConfig) -> Partition:
    """Split the training speakers of the labeled corpus among the experts."""
    workdir = Workdir.from_args(args)
    manifest = Path(to_absolute_path(args.manifest)) if OmegaConf.select(args, "manifest") else workdir.manifest(LABELED)
    out = Path(to_absolute_path(args.out)) if OmegaConf.select(args, "out") else workdir.partition
    speakers = by_speaker(read_manifest(manifest, splits=[Split.TRAIN]))
    method = PartitionMethod.parse(args.experts.method)

    if method == PartitionMethod.RANDOM:
        partition = random_partition(list(speakers), args.experts.k, args.seed)
    else:
        features = {s: [u.features() for u in utterances] for s, utterances in speakers.items()}
        normalizer = fit_normalizer([f for fs in features.values() for f in fs])
        embeddings = [
            speaker_embedding(
                speaker_id,
                features[speaker_id],
                args.corpus.segment_frames,
                args.experts.segments,
                args.experts.utterances,
                derive_seed(args.seed, EMBEDDING_SEED_KEY, i),
                normalizer,
            )
            for i, speaker_id in enumerate(speakers)
        ]
        partition = cluster_speakers(embeddings, args.experts.k, args.seed, args.experts.metric)

    partition.validate(list(speakers))
    partition.save(out)
    agreement = planted_agreement(partition, manifest.parent)
    logger.info(f"{method.value} partition sizes {partition.sizes()}"
                + ("" if agreement is None else f", adjusted Rand vs voice groups {agreement:.3f}"))
    return partition


def write_report(args: DictConfig, report: MetricsReport) -> None:
    workdir = Workdir.from_args(args)
    csv_path, json_path = report.write(workdir.reports)
    logger.info(f"Wrote {csv_path} and {json_path}")
    target = f"student_{Policy.SMART_WEIGHTER.value}"
    improvements = relative_improvements(report, target, list(args.evaluate.splits))
    if len(improvements):
        logger.info(f"Wrote {write_improvements(improvements, workdir.reports)}")


def run_pipeline(args: DictConfig) -> MetricsReport:
    """gen -> cluster -> experts -> decode -> weighter -> rover -> students -> evaluate."""
    generate(args)
    partition_speakers(args)
    train_experts(args)
    decode_experts(args)
    train_weighter(args)
    fuse_corpus(args, POOL)
    for policy in args.pipeline.policies:
        train_student(args, policy)
    report = evaluate(args)
    write_report(args, report)
    return report
