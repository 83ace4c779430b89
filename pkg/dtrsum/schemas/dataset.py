import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class VideoRecord(BaseModel):
    """schema for one video's feature file reference."""

    video_id: str = Field(..., min_length=1, description="Unique video identifier")
    num_frames: int = Field(..., ge=1, description="Frame count T")
    feature_dim: int = Field(..., ge=1, description="Feature dimension D")
    feature_path: str = Field(..., min_length=1, description="DTRF file, relative to the manifest")


class AnnotationRecord(BaseModel):
    """schema for one video's ground-truth summary."""

    video_id: str = Field(..., min_length=1, description="Video this annotation belongs to")
    num_frames: int = Field(..., ge=1, description="Frame count T")
    keyframes: list[int] = Field(..., description="Sorted unique keyframe indices in [0, T)")
    frame_scores: Optional[list[float]] = Field(None, description="Optional importance score per frame")

    @field_validator("keyframes")
    @classmethod
    def unique_keyframes(cls, v):
        """reject duplicates and sort."""

        if len(set(v)) != len(v):
            duplicates = sorted({index for index in v if v.count(index) > 1})
            raise ValueError(f"duplicate keyframe indices: {duplicates}")
        return sorted(v)

    @model_validator(mode="after")
    def within_video(self):
        """keyframes and scores must fit the frame count."""

        out_of_range = [index for index in self.keyframes if not 0 <= index < self.num_frames]
        if out_of_range:
            raise ValueError(f"keyframe indices outside [0, {self.num_frames}): {out_of_range}")
        if self.frame_scores is not None:
            if len(self.frame_scores) != self.num_frames:
                raise ValueError(f"expected {self.num_frames} frame scores, got {len(self.frame_scores)}")
            if any(not 0.0 <= score <= 1.0 for score in self.frame_scores):
                raise ValueError("frame scores must lie in [0, 1]")
        return self

    def keyframe_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_frames)
        mask[self.keyframes] = 1.0
        return mask

    def summary_mask(self, score_valued: bool = False, top_fraction: float = 0.15) -> np.ndarray:
        """
        binary ground-truth summary s_g.

        score-valued annotations are binarized at the top-fraction quantile
        of their frame scores, leaving out frames scored zero; otherwise the
        keyframe mask is returned.
        """

        if not score_valued or self.frame_scores is None:
            return self.keyframe_mask()
        scores = np.asarray(self.frame_scores)
        count = max(1, int(math.floor(top_fraction * self.num_frames + 1e-9)))
        # stable ordering breaks ties towards earlier frames
        top = np.argsort(-scores, kind="stable")[:count]
        # frames scored zero never enter the summary
        top = top[scores[top] > 0.0]
        mask = np.zeros(self.num_frames)
        mask[top] = 1.0
        return mask


class ManifestEntry(BaseModel):
    """schema pairing a video with its annotation document."""

    video: VideoRecord
    annotation_path: str = Field(..., min_length=1, description="Annotation JSON, relative to the manifest")
    score_valued: bool = Field(False, description="Ground truth is an importance curve to be binarized")


class DatasetSplit(BaseModel):
    """schema for the train/test assignment."""

    train: list[str] = Field(default_factory=list)
    test: list[str] = Field(default_factory=list)


class DatasetManifest(BaseModel):
    """schema for a corpus of videos with annotations and an optional split."""

    videos: list[ManifestEntry] = Field(..., min_length=1)
    split: Optional[DatasetSplit] = None

    @model_validator(mode="after")
    def consistent_ids(self):
        """ids are unique and the split only names known videos."""

        ids = [entry.video.video_id for entry in self.videos]
        if len(set(ids)) != len(ids):
            raise ValueError("video ids must be unique")
        if self.split is not None:
            known = set(ids)
            named = self.split.train + self.split.test
            unknown = sorted(set(named) - known)
            if unknown:
                raise ValueError(f"split names unknown videos: {unknown}")
            if set(self.split.train) & set(self.split.test):
                raise ValueError("train and test splits overlap")
        return self

    @property
    def video_ids(self) -> list[str]:
        return [entry.video.video_id for entry in self.videos]


class SyntheticSpec(BaseModel):
    """schema for a synthetic corpus with planted segments and keyframes."""

    n_videos: int = Field(8, ge=1, description="Number of videos")
    min_frames: int = Field(150, ge=1, description="Shortest video")
    max_frames: int = Field(250, ge=1, description="Longest video")
    feature_dim: int = Field(16, ge=1, description="Feature dimension D")
    n_segments: int = Field(10, ge=1, description="Planted blocks per video")
    key_fraction: float = Field(0.5, gt=0.0, lt=1.0, description="Upper bound on the share of key blocks")
    separation: float = Field(10.0, gt=0.0, description="Minimum distance between block means")
    noise_std: float = Field(1.0, gt=0.0, description="Isotropic frame noise")
    salience: float = Field(3.0, ge=0.0, description="Offset shared by key-block means along one direction")
    budget_fraction: float = Field(0.15, gt=0.0, le=1.0, description="Key blocks fit within this share of T")
    block_scores: bool = Field(
        True, description="Score every key-block frame 1 and flag the videos score-valued"
    )
    seed: int = Field(0, ge=0, description="Corpus seed")

    @model_validator(mode="after")
    def frame_range(self):
        """the frame range must be ordered and fit the blocks."""

        if self.min_frames > self.max_frames:
            raise ValueError("min_frames must not exceed max_frames")
        if self.min_frames < self.n_segments:
            raise ValueError("every planted block needs at least one frame")
        return self
