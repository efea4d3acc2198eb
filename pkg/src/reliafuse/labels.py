"""Shared label spaces and modality identifiers.

Three input channels and three prediction tasks: binary deception, an
8-way multi-label emotion space, and a single Big Five personality label.
"""

from __future__ import annotations

import enum


class Modality(enum.Enum):
    TEXT = "text"
    VIDEO = "video"
    AUDIO = "audio"

    def __lt__(self, other: "Modality") -> bool:
        return MODALITIES.index(self) < MODALITIES.index(other)


# stable iteration order: text < video < audio
MODALITIES: tuple[Modality, ...] = (Modality.TEXT, Modality.VIDEO, Modality.AUDIO)

EMOTIONS: tuple[str, ...] = (
    "Neutral",
    "Relaxation",
    "Happiness",
    "Sadness",
    "Fear",
    "Anger",
    "Disgust",
    "Surprise",
)

BIG_FIVE: tuple[str, ...] = (
    "Openness",
    "Conscientiousness",
    "Extraversion",
    "Neuroticism",
    "Agreeableness",
)

DECEPTION_CLASSES: tuple[str, ...] = ("honest", "deceptive")

TASKS: tuple[str, ...] = ("deception", "emotion", "personality")

TASK_DIMS: dict[str, int] = {
    "deception": 2,
    "emotion": len(EMOTIONS),
    "personality": len(BIG_FIVE),
}
