import json

import pytest

from pqcis.clients import MockChatClient
from pqcis.conversation import (
    ConversationState,
    TopicSchemaError,
    advance,
    load_topics,
    render_history,
    summarize_response,
)


def write_topics(tmp_path, payload):
    path = tmp_path / "topics.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class TestLoadTopics:
    def test_toy_fixture_preserves_ptkb_order_and_text(self, toy_topics):
        assert len(toy_topics) == 2
        persona = toy_topics[1]
        assert persona.ptkb["1"] == "I practice yoga daily."
        assert persona.ptkb["4"] == "I enjoy cooking, especially Italian cuisine."
        assert list(persona.ptkb) == ["1", "2", "3", "4", "5"]
        assert len(persona.turns) == 3

    def test_empty_topics_array(self, tmp_path):
        with pytest.raises(TopicSchemaError, match="no topics"):
            load_topics(write_topics(tmp_path, {"topics": []}))

    def test_missing_utterance_names_json_path(self, tmp_path):
        payload = {
            "topics": [
                {
                    "number": "1",
                    "title": "t",
                    "ptkb": {"1": "s"},
                    "turns": [{"turn_id": "1", "response": "r"}],
                }
            ]
        }
        with pytest.raises(TopicSchemaError, match=r"topics\[0\].turns\[0\].utterance"):
            load_topics(write_topics(tmp_path, payload))

    def test_duplicate_turn_id(self, tmp_path):
        payload = {
            "topics": [
                {
                    "number": "1",
                    "title": "t",
                    "ptkb": {},
                    "turns": [
                        {"turn_id": "1", "utterance": "a"},
                        {"turn_id": "1", "utterance": "b"},
                    ],
                }
            ]
        }
        with pytest.raises(TopicSchemaError, match="duplicate turn id"):
            load_topics(write_topics(tmp_path, payload))


class TestSummarizeResponse:
    def test_short_response_returned_verbatim_without_llm_call(self):
        # an empty script would raise on any chat call
        llm = MockChatClient({})
        text = "x" * 149
        assert summarize_response(llm, text) == text
        assert llm.calls == []

    def test_long_response_summarized(self):
        llm = MockChatClient({"summarize": "SUMMARY"})
        assert summarize_response(llm, "y" * 300) == "SUMMARY"
        assert llm.call_count("summarize") == 1

    def test_empty_response_verbatim(self):
        llm = MockChatClient({})
        assert summarize_response(llm, "") == ""

    def test_threshold_is_exactly_150(self):
        llm = MockChatClient({"summarize": "SUM"})
        assert summarize_response(llm, "z" * 150) == "SUM"


class TestAdvance:
    def state(self, toy_topics):
        return ConversationState(topic=toy_topics[0])

    def test_single_advance(self, toy_topics):
        state = self.state(toy_topics)
        advance(state, "hello", "short answer")
        assert state.history == [("user", "hello"), ("assistant", "short answer")]
        assert state.turn_index == 1

    def test_two_advances_preserve_order(self, toy_topics):
        state = self.state(toy_topics)
        advance(state, "q1", "a1")
        advance(state, "q2", "a2")
        assert [t for _, t in state.history] == ["q1", "a1", "q2", "a2"]
        assert state.turn_index == 2

    def test_short_assistant_text_stored_unsummarized(self, toy_topics):
        state = self.state(toy_topics)
        llm = MockChatClient({})
        advance(state, "q", "ten chars.", llm)
        assert state.history[1] == ("assistant", "ten chars.")
        assert llm.calls == []

    def test_long_assistant_text_summarized(self, toy_topics):
        state = self.state(toy_topics)
        llm = MockChatClient({"summarize": "the gist"})
        advance(state, "q", "verbose " * 40, llm)
        assert state.history[1] == ("assistant", "the gist")

    def test_alternation_violation(self, toy_topics):
        state = self.state(toy_topics)
        state.history.append(("user", "dangling"))
        with pytest.raises(ValueError, match="alternation"):
            advance(state, "q", "a")


class TestRenderHistory:
    def test_empty(self, toy_topics):
        assert render_history(ConversationState(topic=toy_topics[0])) == ""

    def test_one_exchange(self, toy_topics):
        state = ConversationState(topic=toy_topics[0])
        advance(state, "where?", "there.")
        assert render_history(state) == "User: where?\nAssistant: there."

    def test_deterministic(self, toy_topics):
        state = ConversationState(topic=toy_topics[0])
        advance(state, "a", "b")
        advance(state, "c", "d")
        assert render_history(state) == render_history(state)
