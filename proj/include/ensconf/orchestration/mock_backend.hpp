#pragma once

// Deterministic offline stand-in for an OpenAI-compatible endpoint.
//
// A fixture directory holds:
//   mock.json        {"seed", "embedding_dim", "agent_accuracy"} (all optional)
//   responses.jsonl  optional overrides {"contains": "...", "content": "..."}; the
//                    first entry whose needle occurs in any message wins.
//   embeddings.jsonl optional fixed vectors {"text": "...", "vector": [...]} returned
//                    for exactly matching input texts.
// Without an override, replies are simulated from a hash of the request: agents
// answer correctly with a per-question probability, follow-ups report
// confidence, analyses and aggregations return JSON, embeddings cluster by the
// answer a text argues for.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "ensconf/core/types.hpp"
#include "ensconf/core/vote.hpp"
#include "ensconf/orchestration/backend.hpp"
#include "ensconf/orchestration/prompts.hpp"
#include "ensconf/util/hash.hpp"
#include "ensconf/util/rng.hpp"
#include "ensconf/util/text.hpp"

namespace ensconf::orchestration {

struct MockSettings {
  std::uint64_t seed = 42;
  std::size_t embedding_dim = 16;
  double agent_accuracy = 0.7;
};

class MockBackend final : public Backend {
 public:
  struct Override {
    std::string contains;
    std::string content;
  };

  MockBackend(MockSettings settings, std::vector<QuestionRecord> questions,
              std::vector<Override> overrides = {},
              std::map<std::string, Embedding> fixed_embeddings = {})
      : settings_(settings),
        overrides_(std::move(overrides)),
        fixed_embeddings_(std::move(fixed_embeddings)) {
    for (auto& q : questions) {
      const std::string key = q.text;
      questions_.emplace(key, std::move(q));
    }
  }

  static MockBackend from_fixture(const std::filesystem::path& dir,
                                  std::vector<QuestionRecord> questions) {
    MockSettings s;
    if (std::ifstream in(dir / "mock.json"); in) {
      const json j = json::parse(in);
      s.seed = j.value("seed", s.seed);
      s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
      s.agent_accuracy = j.value("agent_accuracy", s.agent_accuracy);
    } else if (!std::filesystem::is_directory(dir)) {
      throw Error("mock fixture directory not found: " + dir.string());
    }
    std::vector<Override> overrides;
    if (std::ifstream in(dir / "responses.jsonl"); in) {
      std::string line;
      while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        const json j = json::parse(line);
        overrides.push_back({j.at("contains").get<std::string>(), j.at("content").get<std::string>()});
      }
    }
    std::map<std::string, Embedding> fixed;
    if (std::ifstream in(dir / "embeddings.jsonl"); in) {
      std::string line;
      while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        const json j = json::parse(line);
        fixed[j.at("text").get<std::string>()] = j.at("vector").get<Embedding>();
      }
    }
    return MockBackend(s, std::move(questions), std::move(overrides), std::move(fixed));
  }

  ChatResponse chat(const ChatRequest& request) override {
    ChatResponse r;
    r.content = reply(request);
    for (const auto& m : request.messages) {
      r.prompt_tokens += static_cast<long>(text::count_words(m.content));
    }
    r.completion_tokens = static_cast<long>(text::count_words(r.content));
    return r;
  }

  std::vector<Embedding> embed(const std::string& model,
                               const std::vector<std::string>& texts) override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      auto it = fixed_embeddings_.find(t);
      out.push_back(it != fixed_embeddings_.end() ? it->second : embed_one(model, t));
    }
    return out;
  }

 private:
  std::string reply(const ChatRequest& req) {
    for (const auto& o : overrides_) {
      for (const auto& m : req.messages) {
        if (text::contains(m.content, o.contains)) return o.content;
      }
    }
    const std::string system = req.messages.empty() ? "" : req.messages.front().content;
    const std::string& last = req.messages.back().content;
    const std::string payload = json(req).dump();
    Rng rng(hash::seed_from(std::to_string(settings_.seed) + payload));
    if (system == prompts::kAggregatorSystem) return aggregate_reply(req, rng);
    if (system == prompts::kAnalysisSystem) return analysis_reply(last, rng);
    if (text::contains(last, prompts::kVerbalizedFollowup) ||
        text::contains(last, prompts::kNumberRetryNudge)) {
      return verbalized_reply(req, rng);
    }
    return agent_reply(req, rng);
  }

  const QuestionRecord* find_question(const std::string& prompt) const {
    static const std::regex re(R"(Question: ([^\n]*))");
    std::smatch m;
    if (!std::regex_search(prompt, m, re)) return nullptr;
    auto it = questions_.find(m[1].str());
    return it == questions_.end() ? nullptr : &it->second;
  }

  static std::vector<std::string> labels_of(const QuestionRecord& q) {
    if (q.answer_format == AnswerFormat::yes_no) return {"yes", "no"};
    std::vector<std::string> out;
    for (int i = 0; i < q.choice_count; ++i) out.emplace_back(1, static_cast<char>('A' + i));
    return out;
  }

  std::string agent_reply(const ChatRequest& req, Rng& rng) const {
    const std::string user = req.messages.size() > 1 ? req.messages[1].content : "";
    const QuestionRecord* q = find_question(user);
    QuestionRecord fallback;
    if (!q) {
      fallback.text = user.substr(0, 60);
      fallback.gold = "yes";
      q = &fallback;
    }
    const auto labels = labels_of(*q);
    // Per-question difficulty and a per-question wrong "attractor" answer.
    Rng qrng(hash::seed_from(std::to_string(settings_.seed) + "/question/" + q->id + q->text));
    const double difficulty = qrng.uniform();
    const double p_correct =
        std::clamp(settings_.agent_accuracy + 0.9 * (0.5 - difficulty), 0.05, 0.98);
    std::vector<std::string> wrong;
    for (const auto& l : labels) {
      if (!same_label(l, q->gold)) wrong.push_back(l);
    }
    const std::string attractor = wrong.empty() ? q->gold : wrong[qrng.index(wrong.size())];

    std::string answer = q->gold;
    if (!rng.bernoulli(p_correct) && !wrong.empty()) {
      answer = rng.bernoulli(0.7) ? attractor : wrong[rng.index(wrong.size())];
    }
    static const std::vector<std::string> openings{
        "Let me break this down.", "First, consider what the question is really asking.",
        "The key facts here are worth laying out.", "My first impression is fairly clear.",
        "I will check each possibility in turn."};
    static const std::vector<std::string> middles{
        "The most relevant evidence points in one direction.",
        "There is a plausible counterargument, but it relies on an unusual reading.",
        "Several details are consistent with this interpretation.",
        "An edge case exists, though it does not seem to apply here.",
        "Standard references support this view."};
    std::string out = openings[rng.index(openings.size())] + " On the question \"" +
                      text::utf8_prefix(q->text, 60) + "\", " +
                      middles[rng.index(middles.size())] + " " +
                      middles[rng.index(middles.size())] + "\nAnswer: " + answer;
    return out;
  }

  std::string verbalized_reply(const ChatRequest& req, Rng& rng) const {
    std::optional<std::string> answer;
    const QuestionRecord* q = nullptr;
    for (const auto& m : req.messages) {
      if (m.role == "user" && !q) q = find_question(m.content);
      if (m.role == "assistant") {
        static const std::regex re(R"(Answer: (\S+))");
        std::smatch sm;
        if (std::regex_search(m.content, sm, re)) answer = sm[1].str();
      }
    }
    const bool correct = q && answer && same_label(*answer, q->gold);
    const double mean = correct ? 84.0 : 72.0;
    const int v = static_cast<int>(std::lround(std::clamp(rng.normal(mean, 9.0), 5.0, 100.0)));
    return "Confidence: " + std::to_string(v);
  }

  std::string analysis_reply(const std::string& prompt, Rng& rng) const {
    const QuestionRecord* q = find_question(prompt);
    static const std::regex re(R"(MAJORITY \(answer ([^)]*)\))");
    std::smatch sm;
    const bool majority_correct =
        q && std::regex_search(prompt, sm, re) && same_label(sm[1].str(), q->gold);
    auto u = [&](double lo, double hi) { return std::round(rng.uniform(lo, hi) * 100.0) / 100.0; };
    json j;
    if (majority_correct) {
      j = {{"evidence_overlap", u(0.45, 0.95)}, {"minority_new_info", u(0.05, 0.5)},
           {"minority_strength", u(0.1, 0.55)}, {"majority_conf_language", u(0.55, 0.95)},
           {"reasoning_complexity", u(0.2, 0.7)}};
    } else {
      j = {{"evidence_overlap", u(0.15, 0.75)}, {"minority_new_info", u(0.3, 0.85)},
           {"minority_strength", u(0.35, 0.9)}, {"majority_conf_language", u(0.3, 0.8)},
           {"reasoning_complexity", u(0.35, 0.9)}};
    }
    const double r = rng.uniform();
    const char* depth = majority_correct ? (r < 0.55 ? "late" : r < 0.85 ? "middle" : "early")
                                         : (r < 0.25 ? "late" : r < 0.6 ? "middle" : "early");
    j["divergence_depth"] = depth;
    return j.dump();
  }

  std::string aggregate_reply(const ChatRequest& req, Rng& rng) const {
    const std::string& prompt = req.messages.back().content;
    const QuestionRecord* q = find_question(prompt);
    static const std::regex re(R"(Answer: (\S+))");
    std::vector<std::optional<Label>> answers;
    for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), re);
         it != std::sregex_iterator(); ++it) {
      answers.emplace_back((*it)[1].str());
    }
    std::string answer = q ? q->gold : "yes";
    double vote = 0.5;
    if (!answers.empty()) {
      const auto v = majority_vote(answers);
      answer = v.majority;
      vote = v.vote_confidence;
      // Occasionally the aggregator re-derives the gold answer when some agent had it.
      if (q && rng.bernoulli(0.3)) {
        for (const auto& a : answers) {
          if (a && same_label(*a, q->gold)) answer = q->gold;
        }
      }
    }
    const double conf = std::round(std::clamp(0.55 + 0.4 * vote + rng.normal(0.0, 0.05), 0.0, 1.0) *
                                   100.0) / 100.0;
    return json{{"answer", answer}, {"confidence", conf}}.dump();
  }

  Embedding embed_one(const std::string& model, const std::string& t) const {
    const std::size_t d = settings_.embedding_dim;
    static const std::regex q_re("On the question \"([^\"]*)\"");
    static const std::regex a_re(R"(Answer: (\S+))");
    std::smatch sm;
    const std::string topic = std::regex_search(t, sm, q_re) ? sm[1].str() : t;
    std::string answer;
    for (auto it = std::sregex_iterator(t.begin(), t.end(), a_re); it != std::sregex_iterator(); ++it) {
      answer = (*it)[1].str();
    }
    Rng topic_rng(hash::seed_from(std::to_string(settings_.seed) + "/topic/" + model + topic));
    Rng answer_rng(hash::seed_from(std::to_string(settings_.seed) + "/answer/" + model + topic +
                                   text::normalize_label(answer)));
    Rng noise_rng(hash::seed_from(std::to_string(settings_.seed) + "/text/" + model + t));
    Embedding v(d);
    for (std::size_t i = 0; i < d; ++i) {
      v[i] = 1.0 * topic_rng.normal() + 0.8 * answer_rng.normal() + 0.45 * noise_rng.normal();
    }
    return v;
  }

  MockSettings settings_;
  std::vector<Override> overrides_;
  std::map<std::string, Embedding> fixed_embeddings_;
  std::map<std::string, QuestionRecord> questions_;
};

}  // namespace ensconf::orchestration
