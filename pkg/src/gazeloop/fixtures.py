"""Built-in deterministic fixtures: the default mock corpus, demo dataset
records, and the synthetic SFT-composition manifest generator."""

from __future__ import annotations

from .datapipe import DatasetRecord, SearchType
from .mock.corpus import MockCorpus

# Questions wired into the default corpus scripts.
Q_EMBLEM = "Which company makes the car in the photo?"
Q_CITY = "Which city is shown in the picture?"
Q_LANDMARK = "What is the name of the landmark in the picture?"
Q_HEIGHT = "How tall is the tower shown in the image?"

EMBLEM_CROP = "img:car#crop(100,100,180,160)"


def default_corpus() -> MockCorpus:
    """One corpus covering every scripted flow the tests and CLI demos use."""
    corpus = MockCorpus()
    corpus.images = {
        "img:car": (640, 480),
        "img:paris": (800, 600),
        "img:tower": (600, 900),
    }
    corpus.grounding = {
        "img:car": {
            "the emblem on the front of the car": [
                (100, 100, 180, 160, 0.92),
                (104, 103, 182, 161, 0.88),  # near-duplicate of the first box
                (300, 200, 380, 260, 0.75),
            ],
        },
        "img:tower": {
            "the plaque at the base of the tower": [
                (200, 700, 320, 780, 0.81),
            ],
        },
    }
    corpus.image_search = {
        "img:car": [
            ("thumb:car-scene", "Street scene with parked sedan"),
        ],
        EMBLEM_CROP: [
            ("thumb:emblem-1", "Stellar Motors emblem - brand overview"),
            ("thumb:emblem-2", "Car badges of European manufacturers"),
        ],
        "img:paris": [
            ("thumb:paris-1", "Paris skyline with the Eiffel Tower"),
            ("thumb:paris-2", "Visiting Paris: top sights"),
        ],
        "img:tower": [
            ("thumb:tower-1", "Eiffel Tower - landmark guide"),
        ],
    }
    corpus.text_search = {
        "Stellar Motors manufacturer": [
            ("url:sm-1", "Stellar Motors - encyclopedia entry"),
            ("url:sm-2", "History of Stellar Motors"),
        ],
        "Eiffel Tower height": [
            ("url:et-1", "Eiffel Tower facts and figures"),
            ("url:et-2", "Paris landmarks guide"),
        ],
    }
    corpus.pages = {
        "url:sm-1": "Stellar Motors is an automobile manufacturer founded in 1968.",
        "url:sm-2": "The company Stellar Motors became known for compact sedans.",
        "url:et-1": "The Eiffel Tower stands 330 metres tall including antennas.",
        "url:et-2": "Paris hosts many landmarks; the Eiffel Tower is 330 m tall.",
    }
    corpus.model_scripts = {
        # Glance -> Gaze -> crop dispatch -> text search -> answer
        Q_EMBLEM: [
            "<think>The question targets the maker; the emblem identifies it.</think>"
            "<img_search>the emblem on the front of the car</img_search>",
            "<think>Crop 1 clearly shows the emblem.</think><search_crop>1</search_crop>",
            "<think>The emblem matches Stellar Motors; confirm via text.</think>"
            "<text_search>Stellar Motors manufacturer</text_search>",
            "<think>The summary confirms the maker.</think><answer>Stellar Motors</answer>",
        ],
        # Direct answer, no tools
        Q_CITY: [
            "<think>The skyline is unmistakable.</think><answer>Paris</answer>",
        ],
        # Single whole-image search then answer
        Q_LANDMARK: [
            "<think>Check what the scene matches online.</think><img_search><img></img_search>",
            "<think>Results identify the landmark.</think><answer>Eiffel Tower</answer>",
        ],
        # Text search only
        Q_HEIGHT: [
            "<think>I know the tower; need the exact height.</think>"
            "<text_search>Eiffel Tower height</text_search>",
            "<think>The summary gives the figure.</think><answer>330 metres</answer>",
        ],
    }
    corpus.sampler_scripts = {
        # used by pipeline demos: per-record scripted answers for filtering
        "demo-easy": ["Paris", "Paris", "Paris", "Paris"],
        "demo-hard": ["London", "Paris", "Rome", "Madrid"],
    }
    return corpus


def demo_records() -> list[DatasetRecord]:
    """Small manifest matching the default corpus scripts."""
    return [
        DatasetRecord(
            id="demo-emblem",
            question=Q_EMBLEM,
            image_ref="img:car",
            ground_truth=["Stellar Motors"],
            search_type=SearchType.BOTH,
        ),
        DatasetRecord(
            id="demo-city",
            question=Q_CITY,
            image_ref="img:paris",
            ground_truth=["Paris"],
            search_type=SearchType.SEARCH_FREE,
        ),
        DatasetRecord(
            id="demo-landmark",
            question=Q_LANDMARK,
            image_ref="img:tower",
            ground_truth=["Eiffel Tower"],
            search_type=SearchType.IMAGE_ONLY,
        ),
        DatasetRecord(
            id="demo-height",
            question=Q_HEIGHT,
            image_ref="img:tower",
            ground_truth=["330 metres", "330 m"],
            search_type=SearchType.TEXT_ONLY,
        ),
    ]


# Subtype sizes of the synthetic SFT-composition manifest.
SYNTHETIC_COMPOSITION = (
    (SearchType.SEARCH_FREE, 2500),
    (SearchType.TEXT_ONLY, 750),
    (SearchType.IMAGE_ONLY, 1750),
    (SearchType.BOTH, 750),
)


def synthetic_manifest_path():
    """Path of the bundled 5,750-record synthetic manifest."""
    from importlib import resources

    return resources.files("gazeloop.resources").joinpath("synthetic_sft_manifest.jsonl")


def synthetic_composition_records() -> list[DatasetRecord]:
    """5,750 synthetic records reproducing the documented subtype mix."""
    records = []
    for search_type, count in SYNTHETIC_COMPOSITION:
        for i in range(count):
            rid = f"{search_type.value}-{i:04d}"
            records.append(
                DatasetRecord(
                    id=rid,
                    question=f"Synthetic question {rid}?",
                    image_ref=f"img:{rid}",
                    ground_truth=[f"answer-{rid}"],
                    search_type=search_type,
                )
            )
    return records
