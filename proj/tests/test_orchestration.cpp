#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include "ensconf/baselines.hpp"
#include "ensconf/geometry.hpp"
#include "ensconf/ingestion/store.hpp"
#include "ensconf/orchestration/agents.hpp"
#include "ensconf/orchestration/http_backend.hpp"
#include "ensconf/orchestration/mock_backend.hpp"
#include "ensconf/orchestration/wrappers.hpp"
#include "support.hpp"

using namespace ensconf;
using namespace ensconf::orchestration;
using testing_support::ensemble;
using testing_support::mc_question;
using testing_support::queue;
using testing_support::ScriptedBackend;
using testing_support::temp_dir;
using testing_support::yes_no_question;

TEST(ParseAnswer, SpecExamples) {
  EXPECT_EQ(parse_answer("...so the answer is yes.", AnswerFormat::yes_no, 2), "yes");
  EXPECT_EQ(parse_answer("Answer: (B) because it fits", AnswerFormat::multiple_choice, 4), "B");
  EXPECT_EQ(parse_answer("both could be true", AnswerFormat::yes_no, 2), std::nullopt);
}

TEST(ParseAnswer, LastAssertionWins) {
  EXPECT_EQ(parse_answer("At first yes seems right. Final answer: no", AnswerFormat::yes_no, 2), "no");
  EXPECT_EQ(parse_answer("Not (A). I pick (C).", AnswerFormat::multiple_choice, 4), "C");
  EXPECT_EQ(parse_answer("Answer: C\nActually, Answer: D", AnswerFormat::multiple_choice, 4), "D");
}

TEST(ParseAnswer, LettersOutOfRangeOrProseAreIgnored) {
  EXPECT_EQ(parse_answer("Answer: E", AnswerFormat::multiple_choice, 4), std::nullopt);
  EXPECT_EQ(parse_answer("the answer is a mystery", AnswerFormat::multiple_choice, 4), std::nullopt);
  EXPECT_EQ(parse_answer("I think B is best", AnswerFormat::multiple_choice, 4), "B");
  EXPECT_EQ(parse_answer("**Answer:** **A**", AnswerFormat::multiple_choice, 4), "A");
}

// Fifty handwritten follow-up replies and the confidence each should yield.
TEST(ParseConfidence, RegressionSuite) {
  const std::vector<std::pair<std::string, std::optional<double>>> cases{
      {"85", 0.85},
      {"110", 1.0},
      {"I'm fairly sure, 70 out of 100", 0.70},
      {"Confidence: 92", 0.92},
      {"90%", 0.90},
      {"My confidence is 65.", 0.65},
      {"I would say 80/100.", 0.80},
      {"About 75 percent sure.", 0.75},
      {"0", 0.0},
      {"100", 1.0},
      {"  42  ", 0.42},
      {"On a scale of 0 to 100, I'd put it at 88.", 0.88},
      {"On a scale from 0-100: 60", 0.60},
      {"Confidence level: 95/100", 0.95},
      {"I am 99% confident.", 0.99},
      {"confidence = 55", 0.55},
      {"Roughly 70.", 0.70},
      {"I'd estimate my confidence at around 83", 0.83},
      {"Score: 77", 0.77},
      {"**85**", 0.85},
      {"85.5", 0.855},
      {"0.9", 0.90},
      {"I'm not sure, maybe 50", 0.50},
      {"Certainty: 100%", 1.0},
      {"-", std::nullopt},
      {"I cannot say.", std::nullopt},
      {"", std::nullopt},
      {"Very confident.", std::nullopt},
      {"Between 0 and 100 I choose 73", 0.73},
      {"Confidence (0-100): 81", 0.81},
      {"My answer: 64", 0.64},
      {"I'd go with 90 out of 100.", 0.90},
      {"confident at 40 percent", 0.40},
      {"150%", 1.0},
      {"Confidence: 70\n", 0.70},
      {"70\n\nThat reflects moderate certainty.", 0.70},
      {"I'd rate it 8 out of 10, so 80.", 0.80},
      {"Integer: 66", 0.66},
      {"Final confidence 58", 0.58},
      {"confidence:97", 0.97},
      {"I'm 100 percent sure", 1.0},
      {"The answer is B and I'm 87% sure", 0.87},
      {"Probably around 30%", 0.30},
      {"My confidence in this answer is 45 out of 100.", 0.45},
      {"confidence 5", 0.05},
      {"1", 0.01},
      {"Confidence: 1.0", 1.0},
      {"approximately 93", 0.93},
      {"Reply: 72", 0.72},
      {"I'd put it at 68/100 given the evidence.", 0.68},
  };
  ASSERT_EQ(cases.size(), 50u);
  for (const auto& [reply, expected] : cases) {
    const auto got = parse_confidence(reply);
    if (!expected) {
      EXPECT_FALSE(got.has_value()) << "reply: '" << reply << "' gave " << got.value_or(-1);
    } else {
      ASSERT_TRUE(got.has_value()) << "reply: '" << reply << "'";
      EXPECT_NEAR(*got, *expected, 1e-12) << "reply: '" << reply << "'";
    }
  }
}

TEST(ExtractJson, ToleratesFencesAndProse) {
  const auto j = extract_json_object("Sure!\n```json\n{\"a\": {\"b\": \"}\"}}\n```\nDone.");
  ASSERT_TRUE(j.has_value());
  EXPECT_EQ((*j)["a"]["b"], "}");
  EXPECT_FALSE(extract_json_object("no json here").has_value());
}

TEST(RunAgents, EchoesMockContentVerbatim) {
  ScriptedBackend backend([](const ChatRequest& r) { return "echo from " + r.messages[0].content.substr(0, 12) + "\nAnswer: yes"; });
  const auto team = TeamConfig::homogeneous("m", 5);
  const auto q = yes_no_question("q");
  const auto ts = run_agents(q, team, backend);
  ASSERT_EQ(ts.size(), 5u);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    EXPECT_EQ(ts[k].agent_index, static_cast<int>(k));
    EXPECT_EQ(ts[k].reasoning, "echo from " + team.agents[k].system_prompt.substr(0, 12) + "\nAnswer: yes");
    EXPECT_EQ(ts[k].answer, "yes");
    EXPECT_EQ(ts[k].prompt_tokens, 10);
    EXPECT_EQ(ts[k].completion_tokens, 5);
  }
  for (const auto& r : backend.requests) {
    EXPECT_DOUBLE_EQ(r.temperature, 0.7);
    EXPECT_EQ(r.max_tokens, 800);
  }
}

TEST(RunAgents, HeterogeneousModelsRecordedPerAgent) {
  json cfg = {{"model", "model-a"},
              {"agents", json::array({json::object(), {{"model_id", "model-b"}}, json::object(),
                                      {{"model_id", "model-b"}}, json::object()})}};
  const auto team = cfg.get<TeamConfig>();
  ScriptedBackend backend([](const ChatRequest&) { return "Answer: no"; });
  const auto ts = run_agents(yes_no_question("q"), team, backend);
  const std::vector<std::string> expected{"model-a", "model-b", "model-a", "model-b", "model-a"};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(ts[k].model_id, expected[k]);
  std::multiset<std::string> sent;
  for (const auto& r : backend.requests) sent.insert(r.model);
  EXPECT_EQ(sent.count("model-a"), 3u);
  EXPECT_EQ(sent.count("model-b"), 2u);
}

TEST(RunAgents, ExhaustedRetriesMarkAgentFailed) {
  class Flaky final : public Backend {
   public:
    ChatResponse chat(const ChatRequest& r) override {
      if (r.messages[0].content.find("critical thinker") != std::string::npos) throw TransientError("down");
      return {"Answer: yes", 1, 1};
    }
    std::vector<Embedding> embed(const std::string&, const std::vector<std::string>&) override { return {}; }
  } flaky;
  std::vector<std::chrono::milliseconds> sleeps;
  RetryingBackend retry(flaky, RetryPolicy{3, std::chrono::milliseconds(1000), 2.0},
                        [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  auto team = TeamConfig::homogeneous("m", 5);
  team.concurrency = 1;
  const auto ts = run_agents(yes_no_question("q"), team, retry);
  EXPECT_FALSE(ts[1].answer.has_value());
  EXPECT_EQ(ts[0].answer, "yes");
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000),
                                                             std::chrono::milliseconds(2000)}));
}

TEST(RunAgents, ProtocolErrorsAbort) {
  ScriptedBackend backend([](const ChatRequest&) -> std::string { throw ProtocolError("401 unauthorized"); });
  EXPECT_THROW(run_agents(yes_no_question("q"), TeamConfig::homogeneous("m"), backend), ProtocolError);
}

TEST(Verbalized, MapsAndClamps) {
  const auto q = yes_no_question("q");
  const auto team = TeamConfig::homogeneous("m");
  const auto r = ensemble(q, {"yes", "yes", "no", "yes", "yes"});
  for (const auto& [reply, expected] : std::vector<std::pair<std::string, double>>{{"85", 0.85}, {"110", 1.0}}) {
    ScriptedBackend backend(queue({reply}));
    const auto v = elicit_verbalized_confidence(q, r.transcripts[0], team, backend);
    ASSERT_TRUE(v.confidence.has_value());
    EXPECT_DOUBLE_EQ(*v.confidence, expected);
    EXPECT_EQ(v.usage.calls, 1);
  }
}

TEST(Verbalized, RetriesOnceThenReportsMissing) {
  const auto q = yes_no_question("q");
  const auto r = ensemble(q, {"yes", "yes", "no"});
  ScriptedBackend backend(queue({"hmm", "still unsure"}));
  const auto v = elicit_verbalized_confidence(q, r.transcripts[0], TeamConfig::homogeneous("m", 3), backend);
  EXPECT_FALSE(v.confidence.has_value());
  EXPECT_EQ(v.usage.calls, 2);
  ScriptedBackend second(queue({"hmm", "60"}));
  EXPECT_DOUBLE_EQ(*elicit_verbalized_confidence(q, r.transcripts[0], TeamConfig::homogeneous("m", 3), second).confidence, 0.6);
}

TEST(Verbalized, NoCallForUnparsedAgent) {
  const auto q = yes_no_question("q");
  auto r = ensemble(q, {"yes", std::nullopt, "yes"});
  ScriptedBackend backend(queue({"90"}));
  const auto v = elicit_verbalized_confidence(q, r.transcripts[1], TeamConfig::homogeneous("m", 3), backend);
  EXPECT_FALSE(v.confidence.has_value());
  EXPECT_TRUE(backend.requests.empty());
}

TEST(Structure, UnanimousSkipsTheCall) {
  ScriptedBackend backend(queue({"{}"}));
  const auto r = ensemble(yes_no_question("q"), {"yes", "yes", "yes", "yes", "yes"});
  const auto s = analyze_structure(r, TeamConfig::homogeneous("m"), backend);
  EXPECT_TRUE(backend.requests.empty());
  EXPECT_EQ(s.usage.calls, 0);
  EXPECT_DOUBLE_EQ(s.features.evidence_overlap, 1.0);
  EXPECT_DOUBLE_EQ(s.features.minority_strength, 0.0);
  EXPECT_EQ(s.features.divergence_depth, DivergenceDepth::none);
  EXPECT_EQ(s.features.source, StructureSource::unanimous_default);
}

TEST(Structure, MockValuesPassThroughAndTemperatureIsZero) {
  ScriptedBackend backend(queue({R"({"evidence_overlap":0.7,"minority_new_info":0.2,"minority_strength":0.4,)"
                                 R"("majority_conf_language":0.9,"reasoning_complexity":0.5,"divergence_depth":"late"})"}));
  const auto r = ensemble(yes_no_question("q"), {"yes", "yes", "no", "yes", "no"});
  const auto s = analyze_structure(r, TeamConfig::homogeneous("m"), backend);
  EXPECT_DOUBLE_EQ(s.features.evidence_overlap, 0.7);
  EXPECT_DOUBLE_EQ(s.features.minority_new_info, 0.2);
  EXPECT_DOUBLE_EQ(s.features.minority_strength, 0.4);
  EXPECT_DOUBLE_EQ(s.features.majority_conf_language, 0.9);
  EXPECT_DOUBLE_EQ(s.features.reasoning_complexity, 0.5);
  EXPECT_EQ(s.features.divergence_depth, DivergenceDepth::late);
  EXPECT_EQ(s.features.source, StructureSource::llm_analysis);
  ASSERT_EQ(backend.requests.size(), 1u);
  EXPECT_DOUBLE_EQ(backend.requests[0].temperature, 0.0);
  const std::string& prompt = backend.requests[0].messages.back().content;
  EXPECT_NE(prompt.find("MAJORITY"), std::string::npos);
  EXPECT_NE(prompt.find("MINORITY"), std::string::npos);
}

TEST(Structure, ClampsScoresAndFallsBackAfterRetry) {
  ScriptedBackend clamp(queue({R"({"evidence_overlap":1.7,"minority_new_info":-0.2,"minority_strength":"0.4",)"
                               R"("majority_conf_language":0.9,"reasoning_complexity":0.5,"divergence_depth":"Early"})"}));
  const auto r = ensemble(yes_no_question("q"), {"yes", "no", "yes"});
  const auto s = analyze_structure(r, TeamConfig::homogeneous("m", 3), clamp);
  EXPECT_DOUBLE_EQ(s.features.evidence_overlap, 1.0);
  EXPECT_DOUBLE_EQ(s.features.minority_new_info, 0.0);
  EXPECT_DOUBLE_EQ(s.features.minority_strength, 0.4);
  EXPECT_EQ(s.features.divergence_depth, DivergenceDepth::early);

  ScriptedBackend broken(queue({"not json", "{\"evidence_overlap\": 0.5}"}));
  const auto f = analyze_structure(r, TeamConfig::homogeneous("m", 3), broken);
  EXPECT_EQ(broken.requests.size(), 2u);
  EXPECT_EQ(f.usage.calls, 2);
  EXPECT_EQ(f.features.source, StructureSource::parse_fallback);
  EXPECT_DOUBLE_EQ(f.features.evidence_overlap, 1.0);
  EXPECT_EQ(f.features.divergence_depth, DivergenceDepth::none);
}

TEST(Aggregator, ParsesAnswerAndConfidence) {
  ScriptedBackend backend(queue({R"({"answer":"C","confidence":0.9})"}));
  const auto r = ensemble(mc_question("q", 4, "C"), {"A", "A", "C", "A", "B"});
  const auto a = llm_aggregate(r, TeamConfig::homogeneous("m"), backend);
  EXPECT_EQ(a.answer, "C");
  EXPECT_DOUBLE_EQ(a.confidence, 0.9);
  EXPECT_FALSE(a.fallback);
  EXPECT_DOUBLE_EQ(backend.requests[0].temperature, 0.0);
  EXPECT_EQ(backend.requests[0].max_tokens, 100);
  // Judged against its own answer, not the majority.
  const auto score = baselines::score_llm_aggregator(r, a);
  EXPECT_TRUE(score.correct);
  EXPECT_FALSE(r.correct);
}

TEST(Aggregator, NonGoldAnswerWhileMajorityIsGold) {
  ScriptedBackend backend(queue({R"({"answer":"B","confidence":0.9})"}));
  const auto r = ensemble(mc_question("q", 4, "A"), {"A", "A", "A", "B", "B"});
  const auto a = llm_aggregate(r, TeamConfig::homogeneous("m"), backend);
  EXPECT_FALSE(baselines::score_llm_aggregator(r, a).correct);
  EXPECT_TRUE(r.correct);
}

TEST(Aggregator, TruncatesEachResponseTo1200Characters) {
  ScriptedBackend backend(queue({R"({"answer":"yes","confidence":0.8})"}));
  auto r = ensemble(yes_no_question("q"), {"yes", "yes", "no", "yes", "yes"});
  std::string long_text;
  for (int i = 0; i < 5000; ++i) long_text.push_back(static_cast<char>('a' + i % 26));
  r.transcripts[2].reasoning = long_text;
  llm_aggregate(r, TeamConfig::homogeneous("m"), backend);
  const std::string& prompt = backend.requests[0].messages.back().content;
  EXPECT_NE(prompt.find(long_text.substr(0, 1200)), std::string::npos);
  EXPECT_EQ(prompt.find(long_text.substr(0, 1201)), std::string::npos);
}

TEST(Aggregator, FallbackAfterFailedRetry) {
  ScriptedBackend backend(queue({"I think C", "still prose"}));
  const auto r = ensemble(mc_question("q", 4, "A"), {"A", "A", "B", "A", "C"});
  const auto a = llm_aggregate(r, TeamConfig::homogeneous("m"), backend);
  EXPECT_TRUE(a.fallback);
  EXPECT_EQ(a.answer, "A");
  EXPECT_DOUBLE_EQ(a.confidence, 0.5);
  EXPECT_EQ(a.usage.calls, 2);
}

TEST(Aggregator, PercentConfidenceRescaled) {
  ScriptedBackend backend(queue({R"({"answer":"no","confidence":"85"})"}));
  const auto r = ensemble(yes_no_question("q"), {"no", "no", "yes"});
  EXPECT_DOUBLE_EQ(llm_aggregate(r, TeamConfig::homogeneous("m", 3), backend).confidence, 0.85);
}

TEST(CachingBackend, WarmCacheIssuesNoCalls) {
  const auto root = temp_dir("cache");
  const auto q = yes_no_question("q");
  MockBackend mock(MockSettings{}, {q});
  std::vector<AgentTranscript> first;
  {
    ingestion::TranscriptStore store(root);
    CountingBackend counter(mock);
    CachingBackend cache(counter, store);
    first = run_agents(q, TeamConfig::homogeneous("m"), cache);
    EXPECT_EQ(counter.chat_calls(), 5u);
  }
  ingestion::TranscriptStore store(root);
  CountingBackend counter(mock);
  CachingBackend cache(counter, store);
  const auto second = run_agents(q, TeamConfig::homogeneous("m"), cache);
  EXPECT_EQ(counter.total_calls(), 0u);
  EXPECT_EQ(first, second);
}

TEST(CachingBackend, EmbeddingsCachedByText) {
  ingestion::TranscriptStore store(temp_dir("cache_embed"));
  MockBackend mock(MockSettings{}, {});
  CountingBackend counter(mock);
  CachingBackend cache(counter, store);
  const auto a = geometry::embed_texts({"same text", "same text", "other"}, cache, "e", 16);
  EXPECT_EQ(a.vectors.row(0), a.vectors.row(1));
  const auto b = geometry::embed_texts({"same text", "other"}, cache, "e", 16);
  EXPECT_EQ(counter.embed_calls(), 1u);
  EXPECT_EQ(b.vectors.row(0), a.vectors.row(0));
}

TEST(MockBackend, FixtureEmbeddingsPassThrough) {
  const auto dir = temp_dir("mock_fixture");
  std::ofstream(dir / "mock.json") << R"({"seed": 7, "embedding_dim": 16})";
  std::vector<double> v(16, 0.0);
  v[3] = 2.0;
  std::ofstream(dir / "embeddings.jsonl") << json{{"text", "fixed"}, {"vector", v}}.dump() << "\n";
  auto mock = MockBackend::from_fixture(dir, {});
  const auto e = geometry::embed_texts({"fixed", "free"}, mock, "e", 16);
  EXPECT_EQ(e.dim(), 16);
  EXPECT_DOUBLE_EQ(e.vectors(0, 3), 1.0);
  EXPECT_THROW(geometry::embed_texts({"fixed"}, mock, "e", 32), Error);
}

TEST(MockBackend, DeterministicAcrossInstances) {
  const auto q = mc_question("q", 4, "B");
  MockBackend a(MockSettings{}, {q});
  MockBackend b(MockSettings{}, {q});
  const auto team = TeamConfig::homogeneous("m");
  EXPECT_EQ(run_agents(q, team, a), run_agents(q, team, b));
}

namespace {

// Minimal OpenAI-compatible server on a loopback port.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
      if (fail_next > 0) {
        --fail_next;
        res.status = fail_status;
        return;
      }
      json reply{{"choices", {{{"message", {{"role", "assistant"}, {"content", "Answer: yes"}}}}}},
                 {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body);
      json data = json::array();
      for (std::size_t i = 0; i < body["input"].size(); ++i) {
        data.push_back({{"index", i}, {"embedding", {1.0 + i, 2.0, 3.0}}});
      }
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  json last_body;
  std::string last_auth;
  int fail_next = 0;
  int fail_status = 500;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(HttpBackend, SpeaksChatCompletionsWireFormat) {
  FakeServer server;
  HttpBackend http({server.url(), "secret", 5}, {server.url() + "/v1", "", 5});
  auto team = TeamConfig::homogeneous("served-model", 3);
  const auto r = ensemble(yes_no_question("q"), {"yes", "no", "yes"});
  ScriptedBackend unused(queue({""}));
  const ChatRequest req = analysis_request(r, team);
  const auto resp = http.chat(req);
  EXPECT_EQ(resp.content, "Answer: yes");
  EXPECT_EQ(resp.prompt_tokens, 12);
  EXPECT_EQ(server.last_auth, "Bearer secret");
  EXPECT_EQ(server.last_body["model"], "served-model");
  EXPECT_EQ(server.last_body["temperature"], 0.0);
  EXPECT_TRUE(server.last_body["temperature"].is_number());
  EXPECT_EQ(server.last_body["max_tokens"], team.analysis_max_tokens);
  EXPECT_EQ(server.last_body["messages"][0]["role"], "system");

  const auto e = http.embed("emb", {"x", "y"});
  ASSERT_EQ(e.size(), 2u);
  EXPECT_DOUBLE_EQ(e[1][0], 2.0);
}

TEST(HttpBackend, ServerErrorsAreTransientAndRetried) {
  FakeServer server;
  server.fail_next = 2;
  HttpBackend http({server.url(), "", 5}, {server.url(), "", 5});
  RetryingBackend retry(http, RetryPolicy{3, std::chrono::milliseconds(1), 2.0});
  EXPECT_EQ(retry.chat({"m", {{"user", "hi"}}, 0.7, 10}).content, "Answer: yes");
  server.fail_next = 1;
  server.fail_status = 401;
  EXPECT_THROW(http.chat({"m", {{"user", "hi"}}, 0.7, 10}), ProtocolError);
}

TEST(HttpBackend, UnreachableEndpointIsTransient) {
  HttpBackend http({"http://127.0.0.1:1", "", 1}, {"http://127.0.0.1:1", "", 1});
  EXPECT_THROW(http.chat({"m", {{"user", "hi"}}, 0.0, 1}), TransientError);
}

TEST(TeamConfig, ValidatesAndRoundTrips) {
  auto t = TeamConfig::homogeneous("m", 1);
  EXPECT_THROW(t.validate(), Error);
  t = TeamConfig::homogeneous("m", 5);
  t.analysis_model = "judge";
  const auto back = json(t).get<TeamConfig>();
  EXPECT_EQ(back.K(), 5u);
  EXPECT_EQ(back.analyzer_model(), "judge");
  EXPECT_EQ(back.agents[1].role_name, "Devil's Advocate");
  EXPECT_DOUBLE_EQ(back.agent_temperature, 0.7);
  EXPECT_EQ(back.agent_max_tokens, 800);
}
