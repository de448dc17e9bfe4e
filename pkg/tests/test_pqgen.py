import logging

import pytest

from pqcis import fixtures
from pqcis.clients import MockChatClient
from pqcis.pqgen import (
    EmptyPassageQueryError,
    PassageQuery,
    TemplateError,
    clarify_utterance,
    gen_long_pq,
    gen_short_pq,
    gen_weighted_pqs,
    load_template,
    make_template,
    ptkb_statements_string,
    render_prompt,
)
from pqcis.ptkb import PtkbJudgment, select_relevant

PTKB = {
    "1": "I have previously traveled around Europe and loved it.",
    "2": "I prefer mild weather when I travel.",
    "3": "I am a vegetarian.",
    "4": "I travel on a tight budget.",
    "5": "I get seasick easily.",
}


def selection_for(scores, threshold=0.5):
    return select_relevant([PtkbJudgment(sid, s) for sid, s in scores], threshold)


class SpyChat:
    """Records prompts; plays back canned responses in order."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.prompts = []

    def chat(self, request):
        self.prompts.append("\n".join(m.content for m in request.messages))
        return self.responses.pop(0)


class TestRenderPrompt:
    def test_exact_substitution(self):
        template = make_template("t", "Hi {conversation_history}")
        assert render_prompt(template, {"conversation_history": "X"}) == "Hi X"

    def test_missing_variable_named(self):
        template = make_template("t", "{ptkb_statements_string}")
        with pytest.raises(TemplateError, match="unbound placeholder: ptkb_statements_string"):
            render_prompt(template, {})

    def test_no_placeholders_verbatim(self):
        template = make_template("t", "Nothing to fill in here.")
        assert render_prompt(template, {"question": "unused"}) == "Nothing to fill in here."

    def test_unknown_placeholder_rejected_at_construction(self):
        with pytest.raises(TemplateError, match="unknown placeholder.*made_up_name"):
            make_template("t", "Hello {made_up_name}")

    def test_json_braces_are_not_placeholders(self):
        template = make_template("t", 'Answer like {"1": 0.9} for {question}')
        out = render_prompt(template, {"question": "Q"})
        assert out == 'Answer like {"1": 0.9} for Q'

    def test_substitution_is_single_pass(self):
        template = make_template("t", "{question}")
        out = render_prompt(template, {"question": "{passages}"})
        assert out == "{passages}"

    def test_residue_identity(self):
        template = make_template("t", "A {question} B {passages} C")
        out = render_prompt(template, {"question": "qq", "passages": "pp"})
        assert out == "A qq B pp C"

    def test_all_shipped_templates_load(self):
        for name in fixtures.TEMPLATE_NAMES:
            template = load_template(name)
            assert template.placeholders() <= {
                "ptkb_statements_string",
                "conversation_history",
                "current_utterance",
                "clarified_query",
                "ptkb_statement",
                "response_text",
                "passages",
                "question",
            }

    def test_missing_template_file(self, tmp_path):
        with pytest.raises(TemplateError, match="no such template"):
            load_template("nonexistent", tmp_path)


class TestPtkbStatementsString:
    def test_id_numbered_lines(self):
        out = ptkb_statements_string(PTKB, ["2", "4"])
        assert out == "2. I prefer mild weather when I travel.\n4. I travel on a tight budget."

    def test_defaults_to_all_statements(self):
        assert ptkb_statements_string(PTKB).count("\n") == 4


class TestClarifyUtterance:
    def test_scripted_rewrite(self):
        llm = MockChatClient({"clarify": "What is the best time of year to visit Egypt?"})
        out = clarify_utterance(llm, "history", "what about there?")
        assert out == "What is the best time of year to visit Egypt?"

    def test_empty_generation_falls_back_to_raw(self):
        llm = MockChatClient({"clarify": ""})
        assert clarify_utterance(llm, "", "raw question") == "raw question"

    def test_leading_role_label_stripped(self):
        llm = MockChatClient({"clarify": "Assistant: X"})
        assert clarify_utterance(llm, "", "q") == "X"


class TestGenWeightedPqs:
    def test_no_relevant_statements_single_combined(self):
        llm = MockChatClient({"combined_pq": "General article text."})
        pqs = gen_weighted_pqs(llm, "clarified", selection_for([]), PTKB)
        assert len(pqs) == 1
        assert pqs[0].kind == "combined"
        assert pqs[0].weight == 1.0

    def test_two_relevant_statements_three_queries(self):
        llm = MockChatClient(
            {"combined_pq": "combined text", "ptkb_pq:0": "about europe", "ptkb_pq:1": "about mild weather"}
        )
        selection = selection_for([("1", 0.9), ("2", 0.6)])
        pqs = gen_weighted_pqs(llm, "clarified", selection, PTKB)
        assert [pq.kind for pq in pqs] == ["combined", "per_ptkb", "per_ptkb"]
        assert [pq.weight for pq in pqs] == [1.0, 0.9, 0.6]
        assert [pq.source_ptkb_id for pq in pqs] == [None, "1", "2"]

    def test_five_relevant_statements_cap_at_four_queries(self):
        llm = MockChatClient({"combined_pq": "c", "ptkb_pq": "p"})
        selection = selection_for([(sid, 0.9 - int(sid) * 0.05) for sid in PTKB])
        pqs = gen_weighted_pqs(llm, "clarified", selection, PTKB)
        assert len(pqs) == 4
        assert [pq.source_ptkb_id for pq in pqs[1:]] == ["1", "2", "3"]  # top-3 scores

    def test_empty_combined_generation_is_error(self):
        llm = MockChatClient({"combined_pq": "   "})
        with pytest.raises(EmptyPassageQueryError, match="empty passage query"):
            gen_weighted_pqs(llm, "clarified", selection_for([]), PTKB)

    def test_clarified_must_be_non_empty(self):
        with pytest.raises(ValueError):
            gen_weighted_pqs(MockChatClient({}), "", selection_for([]), PTKB)


class TestGenShortPq:
    def test_reference_sample_stored_verbatim_after_strip(self):
        sample = (fixtures.data_dir() / "samples" / "sample_short_pq.txt").read_text(encoding="utf-8").strip()
        llm = MockChatClient({"short_pq": "Assistant: " + sample})
        pq = gen_short_pq(llm, "User: hi", selection_for([]), PTKB)
        assert pq.text == sample
        assert pq.kind == "short"
        assert pq.weight == 1.0

    def test_strip_rule(self):
        llm = MockChatClient({"short_pq": "Assistant: OK."})
        assert gen_short_pq(llm, "", selection_for([]), PTKB).text == "OK."

    def test_empty_generation_is_error(self):
        llm = MockChatClient({"short_pq": "Assistant: "})
        with pytest.raises(EmptyPassageQueryError):
            gen_short_pq(llm, "", selection_for([]), PTKB)


class TestGenLongPq:
    def test_reference_sample_stored_verbatim_after_strip(self):
        sample = (fixtures.data_dir() / "samples" / "sample_long_pq.txt").read_text(encoding="utf-8").strip()
        llm = MockChatClient({"long_pq": "Passage: " + sample})
        pq = gen_long_pq(llm, "User: hi", selection_for([]), PTKB)
        assert pq.text == sample
        assert pq.kind == "long"

    def test_strip_rule(self):
        llm = MockChatClient({"long_pq": "Passage: X"})
        assert gen_long_pq(llm, "", selection_for([]), PTKB).text == "X"

    def test_style_menu_selects_styled_template(self):
        spy = SpyChat(["Passage: text"])
        gen_long_pq(spy, "", selection_for([]), PTKB, style_menu=True)
        assert "Encyclopedia article" in spy.prompts[0]
        assert "Blog post" in spy.prompts[0]
        assert "Government website" in spy.prompts[0]

    def test_generic_template_without_style_menu(self):
        spy = SpyChat(["Passage: text"])
        gen_long_pq(spy, "", selection_for([]), PTKB, style_menu=False)
        assert "Encyclopedia article" not in spy.prompts[0]
        assert "online article" in spy.prompts[0]

    def test_relevant_statements_rendered_into_prompt(self):
        spy = SpyChat(["Passage: text"])
        gen_long_pq(spy, "User: q", selection_for([("2", 0.8)]), PTKB, style_menu=True)
        assert "2. I prefer mild weather when I travel." in spy.prompts[0]
        assert "I am a vegetarian" not in spy.prompts[0]

    def test_sentence_drift_warning(self, caplog):
        llm = MockChatClient({"long_pq": "Passage: Just one sentence."})
        with caplog.at_level(logging.WARNING, logger="pqcis.pqgen"):
            gen_long_pq(llm, "", selection_for([]), PTKB)
        assert any("expected about 10" in record.message for record in caplog.records)


class TestPassageQueryType:
    def test_kind_source_id_consistency(self):
        with pytest.raises(ValueError):
            PassageQuery(text="x", weight=1.0, kind="combined", source_ptkb_id="1")
        with pytest.raises(ValueError):
            PassageQuery(text="x", weight=1.0, kind="per_ptkb")

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            PassageQuery(text="x", weight=-0.1, kind="short")
        with pytest.raises(ValueError):
            PassageQuery(text="x", weight=float("nan"), kind="short")
