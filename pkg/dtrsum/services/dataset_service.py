import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from dtrsum.core.errors import AnnotationError, ManifestError, ValidationError
from dtrsum.core.rng import make_rng
from dtrsum.schemas.dataset import (
    AnnotationRecord,
    DatasetManifest,
    DatasetSplit,
    ManifestEntry,
    SyntheticSpec,
    VideoRecord,
)
from dtrsum.storage.documents import read_model, write_json
from dtrsum.storage.features import load_features, write_features

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MAX_MEAN_DRAWS = 1000


@dataclass
class LoadedVideo:
    """a validated video: float64 features, its annotation and the binary summary s_g."""

    video_id: str
    features: np.ndarray
    annotation: AnnotationRecord
    labels: np.ndarray

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]


@dataclass
class SyntheticVideo:
    features: np.ndarray
    boundaries: list[int]
    means: np.ndarray
    key_blocks: list[int]
    keyframes: list[int]

    def block_scores(self) -> np.ndarray:
        """1 on every frame of a key block, 0 elsewhere."""

        scores = np.zeros(self.features.shape[0])
        for block in self.key_blocks:
            scores[self.boundaries[block]:self.boundaries[block + 1]] = 1.0
        return scores


def load_annotations(path) -> AnnotationRecord:
    """
    read and validate one annotation document.

    raises:
        AnnotationError: for missing fields, duplicate or out-of-range keyframes
    """

    return read_model(path, AnnotationRecord, AnnotationError)


def load_manifest(path) -> DatasetManifest:
    return read_model(path, DatasetManifest, ManifestError)


def load_video(entry: ManifestEntry, root: Path) -> LoadedVideo:
    """
    load one manifest entry and check it against its files.

    raises:
        ManifestError: if the feature file or annotation disagrees with the record
    """

    record = entry.video
    features = load_features(root / record.feature_path)
    if features.shape != (record.num_frames, record.feature_dim):
        raise ManifestError(
            f"{record.video_id}: manifest declares {record.num_frames}×{record.feature_dim}, "
            f"{record.feature_path} holds {features.shape[0]}×{features.shape[1]}"
        )
    annotation = load_annotations(root / entry.annotation_path)
    if annotation.video_id != record.video_id:
        raise ManifestError(f"{entry.annotation_path} annotates '{annotation.video_id}', not '{record.video_id}'")
    if annotation.num_frames != record.num_frames:
        raise ManifestError(
            f"{record.video_id}: annotation covers {annotation.num_frames} frames, video has {record.num_frames}"
        )
    if entry.score_valued and annotation.frame_scores is None:
        raise ManifestError(f"{record.video_id}: flagged score-valued but has no frame scores")
    labels = annotation.summary_mask(score_valued=entry.score_valued)
    return LoadedVideo(record.video_id, features, annotation, labels)


def load_dataset(path) -> tuple[DatasetManifest, dict[str, LoadedVideo]]:
    """load and validate every video of a manifest before any work starts."""

    path = Path(path)
    manifest = load_manifest(path)
    videos = {entry.video.video_id: load_video(entry, path.parent) for entry in manifest.videos}
    dims = {video.features.shape[1] for video in videos.values()}
    if len(dims) > 1:
        raise ManifestError(f"videos disagree on the feature dimension: {sorted(dims)}")
    logger.info(f"loaded {len(videos)} videos from {path}")
    return manifest, videos


def split_dataset(video_ids: list[str], ratio: float = 0.8, seed: int = 0) -> tuple[list[str], list[str]]:
    """
    seeded shuffle into ceil(ratio * n) training ids and the rest for testing.

    raises:
        ManifestError: if there are no videos
    """

    if not video_ids:
        raise ManifestError("cannot split an empty manifest")
    if not 0.0 < ratio <= 1.0:
        raise ValidationError(f"split ratio must lie in (0, 1], got {ratio}")
    order = make_rng(seed).permutation(len(video_ids))
    shuffled = [video_ids[i] for i in order]
    n_train = math.ceil(ratio * len(video_ids) - 1e-9)
    return shuffled[:n_train], shuffled[n_train:]


def resolve_split(manifest: DatasetManifest, seed: int) -> tuple[list[str], list[str]]:
    """the manifest's own split if it has one, else a seeded 80/20 split."""

    if manifest.split is not None:
        if not manifest.split.train:
            raise ManifestError("manifest split has no training videos")
        return list(manifest.split.train), list(manifest.split.test)
    return split_dataset(manifest.video_ids, seed=seed)


def salience_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    direction = rng.normal(size=dim)
    return direction / np.linalg.norm(direction)


def _key_blocks(lengths: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator) -> list[int]:
    budget = math.floor(spec.budget_fraction * lengths.sum() + 1e-9)
    limit = max(1, math.floor(spec.key_fraction * len(lengths)))
    chosen, used = [], 0
    for block in rng.permutation(len(lengths)):
        if len(chosen) < limit and used + lengths[block] <= budget:
            chosen.append(int(block))
            used += int(lengths[block])
    return sorted(chosen)


def _block_means(
    n_blocks: int, key_blocks: list[int], direction: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator
) -> np.ndarray:
    means = []
    for block in range(n_blocks):
        for _ in range(MAX_MEAN_DRAWS):
            candidate = rng.normal(0.0, spec.separation, size=spec.feature_dim)
            # salience lives only along the shared direction
            candidate -= (candidate @ direction) * direction
            if block in key_blocks:
                candidate += spec.salience * direction
            if all(np.linalg.norm(candidate - other) >= spec.separation for other in means):
                means.append(candidate)
                break
        else:
            raise ValidationError(f"could not place {n_blocks} block means {spec.separation} apart")
    return np.array(means)


def synth_video(
    spec: SyntheticSpec, num_frames: int, direction: np.ndarray, rng: np.random.Generator
) -> SyntheticVideo:
    """
    one video of n_segments Gaussian blocks.

    key blocks are picked greedily in random order while their total
    length fits the budget; each carries one keyframe at its center.
    """

    n_blocks = spec.n_segments
    min_len = max(1, num_frames // (3 * n_blocks))
    lengths = min_len + rng.multinomial(num_frames - n_blocks * min_len, np.full(n_blocks, 1.0 / n_blocks))
    boundaries = [0, *np.cumsum(lengths).tolist()]
    key_blocks = _key_blocks(lengths, spec, rng)
    means = _block_means(n_blocks, key_blocks, direction, spec, rng)

    features = np.repeat(means, lengths, axis=0)
    features = features + rng.normal(0.0, spec.noise_std, size=features.shape)
    keyframes = [boundaries[k] + int(lengths[k]) // 2 for k in key_blocks]
    return SyntheticVideo(features, boundaries, means, key_blocks, keyframes)


def synthetic_annotation(video_id: str, video: SyntheticVideo, spec: SyntheticSpec) -> AnnotationRecord:
    """
    ground truth of one synthetic video.

    with block_scores the whole key blocks are scored 1, so the binary
    summary covers every key-block frame rather than the centers alone.
    """

    frame_scores = video.block_scores().tolist() if spec.block_scores else None
    return AnnotationRecord(
        video_id=video_id,
        num_frames=video.features.shape[0],
        keyframes=video.keyframes,
        frame_scores=frame_scores,
    )


def synth_dataset(spec: SyntheticSpec, out_dir) -> DatasetManifest:
    """
    write a synthetic corpus: DTRF features, annotations and a manifest with an 80/20 split.

    identical specs produce identical bytes.
    """

    out_dir = Path(out_dir)
    rng = make_rng(spec.seed)
    direction = salience_direction(spec.feature_dim, rng)
    entries = []
    for index in range(spec.n_videos):
        video_id = f"video_{index:03d}"
        num_frames = int(rng.integers(spec.min_frames, spec.max_frames + 1))
        video = synth_video(spec, num_frames, direction, rng)
        feature_path = f"features/{video_id}.dtrf"
        annotation_path = f"annotations/{video_id}.json"
        write_features(out_dir / feature_path, video.features)
        write_json(out_dir / annotation_path, synthetic_annotation(video_id, video, spec))
        entries.append(
            ManifestEntry(
                video=VideoRecord(
                    video_id=video_id,
                    num_frames=num_frames,
                    feature_dim=spec.feature_dim,
                    feature_path=feature_path,
                ),
                annotation_path=annotation_path,
                score_valued=spec.block_scores,
            )
        )

    train_ids, test_ids = split_dataset([entry.video.video_id for entry in entries], seed=spec.seed)
    manifest = DatasetManifest(videos=entries, split=DatasetSplit(train=train_ids, test=test_ids))
    write_json(out_dir / MANIFEST_NAME, manifest)
    logger.info(f"wrote {spec.n_videos} synthetic videos to {out_dir}")
    return manifest


def select_videos(videos: dict[str, LoadedVideo], ids: list[str]) -> list[LoadedVideo]:
    missing = [video_id for video_id in ids if video_id not in videos]
    if missing:
        raise ManifestError(f"unknown video ids: {missing}")
    return [videos[video_id] for video_id in ids]


def feature_dim(videos: dict[str, LoadedVideo]) -> Optional[int]:
    for video in videos.values():
        return video.features.shape[1]
    return None
