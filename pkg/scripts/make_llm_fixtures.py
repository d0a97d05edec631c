#!/usr/bin/env python3
"""Record the canned chat replies used by the offline prompting tests.

Replies are synthesized deterministically from the request text, so
re-running this script after a prompt-template change refreshes the
fixture directory (tests/fixtures/llm) with matching request hashes.
"""

from __future__ import annotations

import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from awt.prompting import (  # noqa: E402
    DEFAULT_MODEL,
    DEFAULT_TEMPERATURE,
    DatasetSpec,
    FixtureClient,
    generate_description_bundle,
)

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "llm"

SKETCH_QUESTIONS = [
    "What basic shapes can you identify in the sketch of {}?",
    "How would you describe the linework in the sketch of {}?",
    "Are there any particular strokes that define the sketch of {}?",
    "What outline features make the sketch of {} recognizable?",
    "How is shading used in the sketch of {}?",
    "Which proportions stand out in the sketch of {}?",
    "What textures are suggested by the hatching on {}?",
    "How would you describe the pose of {} in the sketch?",
    "What contour details distinguish the sketch of {}?",
    "Which parts of {} does the sketch emphasize?",
]

GENERIC_QUESTIONS = [
    "How would you describe the overall appearance of a {} in the image?",
    "What colors and patterns are visible on a {}?",
    "What shapes and structures are noticeable in the image of a {}?",
    "What surroundings typically appear with a {}?",
    "Which distinguishing marks identify a {}?",
    "How large does a {} appear relative to its surroundings?",
    "What texture does the surface of a {} show?",
    "What is the silhouette of a {} like?",
    "Which body or object parts of a {} stand out?",
    "What lighting or background suits an image of a {}?",
]

SKETCH_TRAITS = [
    "bold outline strokes",
    "cross-hatched shading",
    "minimal background detail",
    "exaggerated contour lines",
    "monochrome pencil texture",
]

GENERIC_TRAITS = [
    "distinctive silhouette",
    "characteristic color patches",
    "recognizable proportions",
    "typical natural surroundings",
    "fine surface texture",
]


class ScriptedClient:
    """Synthesizes a deterministic reply and records it as a fixture."""

    def __init__(self, directory: Path, model: str = DEFAULT_MODEL):
        self.directory = directory
        self.model = model

    def complete(self, messages, *, temperature):
        content = self._reply(messages[0]["content"])
        FixtureClient.store(self.directory, self.model, messages, temperature, content)
        return content

    def _reply(self, request: str) -> str:
        sketchy = "sketch" in request.lower()
        if request.startswith("Generate questions to classify images"):
            count = int(re.search(r"exactly (\d+) numbered", request).group(1))
            pool = SKETCH_QUESTIONS if sketchy else GENERIC_QUESTIONS
            lines = [f"{i + 1}. {pool[i % len(pool)]}" for i in range(count)]
            return "\n".join(lines)
        m = re.search(r"Answer with (\d+) short visual descriptions? of ([^,]+), one per line", request)
        count = int(m.group(1))
        subject = m.group(2)
        question = request.split(" Answer with ")[0]
        traits = SKETCH_TRAITS if sketchy else GENERIC_TRAITS
        lines = []
        for i in range(count):
            trait = traits[(hash_free_index(question) + i) % len(traits)]
            style = "a black and white sketch" if sketchy else "a photo"
            lines.append(f"{subject} shown as {style} with {trait} (detail {i + 1})")
        return "\n".join(lines)


def hash_free_index(text: str) -> int:
    return sum(text.encode("utf-8")) % 97


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    for old in FIXTURE_DIR.glob("*.json"):
        old.unlink()
    client = ScriptedClient(FIXTURE_DIR)

    sketch = DatasetSpec(
        name="imagenet-sketch",
        description="consists of black and white sketches of ImageNet categories",
        class_names=("cat", "dog"),
    )
    generate_description_bundle(sketch, client, q_count=10, m=50, temperature=DEFAULT_TEMPERATURE)
    generate_description_bundle(sketch, client, q_count=2, m=4, temperature=DEFAULT_TEMPERATURE)

    base = DatasetSpec(name="plain", description="", class_names=("cat",))
    generate_description_bundle(base, client, q_count=2, m=2, temperature=DEFAULT_TEMPERATURE)

    print(f"recorded {len(list(FIXTURE_DIR.glob('*.json')))} fixtures in {FIXTURE_DIR}")


if __name__ == "__main__":
    main()
