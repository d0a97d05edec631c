import json
from pathlib import Path

import pytest

from awt.errors import ClientError, MissingPlaceholder, QuotaExhausted, UnparseableReply
from awt.prompting import (
    DatasetSpec,
    FixtureClient,
    QuestionSet,
    generate_description_bundle,
    generate_descriptions,
    generate_questions,
    parse_questions,
    render_step1_prompt,
    render_step2_prompt,
    request_hash,
)

FIXTURES = Path(__file__).parent / "fixtures" / "llm"

SKETCH_SPEC = DatasetSpec(
    name="imagenet-sketch",
    description="consists of black and white sketches of ImageNet categories",
    class_names=("cat", "dog"),
)


class TestStep1Template:
    def test_dataset_clause_joined_verbatim(self):
        prompt = render_step1_prompt(SKETCH_SPEC, 3)
        assert prompt == (
            "Generate questions to classify images from a dataset, which "
            "consists of black and white sketches of ImageNet categories. "
            "Write exactly 3 numbered questions, "
            "each containing '{}' as a placeholder for the class name."
        )

    def test_empty_description_falls_back_to_base(self):
        spec = DatasetSpec(name="plain", description="", class_names=("cat",))
        prompt = render_step1_prompt(spec, 2)
        assert prompt.startswith("Generate questions to classify images. ")
        assert ", which" not in prompt

    def test_singular_question_count(self):
        prompt = render_step1_prompt(SKETCH_SPEC, 1)
        assert "Write exactly 1 numbered question," in prompt
        assert "questions" not in prompt.split("dataset, which")[1]

    def test_pure_template(self):
        assert render_step1_prompt(SKETCH_SPEC, 5) == render_step1_prompt(SKETCH_SPEC, 5)


class TestParseQuestions:
    def test_numbered_line(self):
        reply = "1. How would you describe the overall appearance of a {} in the image?"
        qs = parse_questions(reply, 1)
        assert qs.questions == (
            "How would you describe the overall appearance of a {} in the image?",
        )

    def test_empty_reply(self):
        with pytest.raises(UnparseableReply):
            parse_questions("\n\n  \n", 3)

    def test_missing_placeholder(self):
        with pytest.raises(MissingPlaceholder):
            parse_questions("1. What color is the sky?", 1)

    def test_double_placeholder_rejected(self):
        with pytest.raises(MissingPlaceholder):
            parse_questions("1. Is {} bigger than {}?", 1)

    def test_placeholder_variants_normalized(self):
        reply = "\n".join(
            [
                "1. What shapes define a {class}?",
                "2. Which colors dominate the {class name}?",
                "- How large is the {category}?",
            ]
        )
        qs = parse_questions(reply, 3)
        assert all(q.count("{}") == 1 for q in qs.questions)

    def test_truncates_to_expected(self):
        reply = "\n".join(f"{i}. Question {i} about {{}}?" for i in range(1, 6))
        assert len(parse_questions(reply, 2)) == 2


class TestQuestionSet:
    def test_validates_placeholders(self):
        with pytest.raises(MissingPlaceholder):
            QuestionSet(("no placeholder here",))
        with pytest.raises(UnparseableReply):
            QuestionSet(())


class TestHttpClient:
    def test_missing_api_key_raises(self, monkeypatch):
        from awt.prompting import HttpChatClient

        monkeypatch.delenv("AWT_LLM_API_KEY", raising=False)
        with pytest.raises(ClientError, match="AWT_LLM_API_KEY"):
            HttpChatClient("https://example.invalid/v1/chat")

    def test_env_key_is_picked_up(self, monkeypatch):
        from awt.prompting import HttpChatClient

        monkeypatch.setenv("AWT_LLM_API_KEY", "sk-test")
        client = HttpChatClient("https://example.invalid/v1/chat")
        assert client.api_key == "sk-test"


class TestFixtureClient:
    def test_round_trip_store_and_replay(self, tmp_path):
        messages = [{"role": "user", "content": "hello"}]
        FixtureClient.store(tmp_path, "test-model", messages, 0.9, "hi there")
        client = FixtureClient(tmp_path, model="test-model")
        assert client.complete(messages, temperature=0.9) == "hi there"

    def test_unrecorded_request_raises(self, tmp_path):
        client = FixtureClient(tmp_path, model="test-model")
        with pytest.raises(ClientError):
            client.complete([{"role": "user", "content": "never recorded"}], temperature=0.9)

    def test_missing_directory_raises(self, tmp_path):
        with pytest.raises(ClientError):
            FixtureClient(tmp_path / "nope")

    def test_hash_depends_on_all_request_fields(self):
        msg = [{"role": "user", "content": "x"}]
        h = request_hash("m", msg, 0.9)
        assert h != request_hash("m2", msg, 0.9)
        assert h != request_hash("m", msg, 0.5)
        assert h != request_hash("m", [{"role": "user", "content": "y"}], 0.9)


class TestGeneration:
    def test_two_step_flow_from_recorded_replies(self):
        client = FixtureClient(FIXTURES)
        questions = generate_questions(SKETCH_SPEC, 2, client)
        assert len(questions) == 2
        ds = generate_descriptions(SKETCH_SPEC, questions, "cat", 4, client)
        assert len(ds.descriptions) == 4
        assert ds.provenance == (0, 0, 1, 1)
        assert ds.metadata["temperature"] == 0.9
        assert all("cat" in d for d in ds.descriptions)

    def test_sketch_dataset_descriptions_mention_sketch_attributes(self):
        client = FixtureClient(FIXTURES)
        questions = generate_questions(SKETCH_SPEC, 2, client)
        ds = generate_descriptions(SKETCH_SPEC, questions, "dog", 4, client)
        assert any("sketch" in d for d in ds.descriptions)

    def test_round_robin_split(self):
        client = FixtureClient(FIXTURES)
        questions = generate_questions(SKETCH_SPEC, 10, client)
        ds = generate_descriptions(SKETCH_SPEC, questions, "cat", 50, client)
        assert len(ds.descriptions) == 50
        # ceil(50/10) = 5 answers per question
        assert ds.provenance == tuple(qi for qi in range(10) for _ in range(5))

    def test_bundle_reproducible_offline(self):
        client = FixtureClient(FIXTURES)
        b1 = generate_description_bundle(SKETCH_SPEC, client, q_count=2, m=4)
        b2 = generate_description_bundle(SKETCH_SPEC, client, q_count=2, m=4)
        assert json.dumps(b1, sort_keys=True) == json.dumps(b2, sort_keys=True)

    def test_exactly_m_or_error(self, tmp_path):
        spec = DatasetSpec(name="t", description="", class_names=("cat",))
        question = "Describe {}?"
        messages = lambda content: [{"role": "user", "content": content}]
        # recorded reply yields only 1 answer per request including retries
        from awt.prompting import render_step2_prompt

        base = render_step2_prompt(question, "cat", 5)
        FixtureClient.store(tmp_path, "gpt-3.5-turbo", messages(base), 0.9, "one answer")
        for batch in (2, 3):
            FixtureClient.store(
                tmp_path, "gpt-3.5-turbo", messages(f"{base} (batch {batch})"), 0.9, "one answer"
            )
        client = FixtureClient(tmp_path)
        with pytest.raises(QuotaExhausted):
            generate_descriptions(spec, QuestionSet((question,)), "cat", 5, client)


class TestStep2Template:
    def test_instantiates_class_name(self):
        prompt = render_step2_prompt("What colors mark a {}?", "red fox", 3)
        assert "red fox" in prompt
        assert "{}" not in prompt
        assert "3 short visual descriptions" in prompt

    def test_singular(self):
        assert "1 short visual description " in render_step2_prompt("About {}?", "cat", 1)
