#pragma once

// Builders and fakes shared by the test binaries.

#include <unistd.h>

#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ensconf/core/types.hpp"
#include "ensconf/core/vote.hpp"
#include "ensconf/orchestration/backend.hpp"
#include "ensconf/util/error.hpp"
#include "ensconf/util/rng.hpp"

namespace testing_support {

using namespace ensconf;

inline QuestionRecord yes_no_question(std::string id, std::string gold = "yes") {
  QuestionRecord q;
  q.id = id;
  q.benchmark = Benchmark::strategyqa;
  q.text = "Is " + id + " true?";
  q.answer_format = AnswerFormat::yes_no;
  q.choice_count = 2;
  q.gold = std::move(gold);
  return q;
}

inline QuestionRecord mc_question(std::string id, int choices = 4, std::string gold = "A") {
  QuestionRecord q;
  q.id = id;
  q.benchmark = Benchmark::mmlu;
  q.text = "Which option fits " + id + "?";
  q.answer_format = AnswerFormat::multiple_choice;
  for (int i = 0; i < choices; ++i) q.choices.push_back("option " + std::to_string(i));
  q.choice_count = choices;
  q.gold = std::move(gold);
  return q;
}

inline std::vector<AgentTranscript> transcripts(const std::vector<std::optional<std::string>>& answers) {
  std::vector<AgentTranscript> out;
  for (std::size_t k = 0; k < answers.size(); ++k) {
    AgentTranscript t;
    t.agent_index = static_cast<int>(k);
    t.role_name = "role" + std::to_string(k);
    t.model_id = "m";
    t.reasoning = "reasoning of agent " + std::to_string(k) + "\nAnswer: " + answers[k].value_or("?");
    t.answer = answers[k];
    out.push_back(t);
  }
  return out;
}

inline EnsembleRecord ensemble(QuestionRecord q, const std::vector<std::optional<std::string>>& answers) {
  return make_ensemble(std::move(q), transcripts(answers));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto p = std::filesystem::temp_directory_path() /
           ("ensconf_test_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Backend answering from a caller-supplied function and recording every request.
class ScriptedBackend final : public orchestration::Backend {
 public:
  using Reply = std::function<std::string(const orchestration::ChatRequest&)>;

  explicit ScriptedBackend(Reply reply) : reply_(std::move(reply)) {}

  orchestration::ChatResponse chat(const orchestration::ChatRequest& request) override {
    {
      std::lock_guard lock(mu_);
      requests.push_back(request);
    }
    orchestration::ChatResponse r;
    r.content = reply_(request);
    r.prompt_tokens = 10;
    r.completion_tokens = 5;
    return r;
  }

  std::vector<orchestration::Embedding> embed(const std::string&,
                                              const std::vector<std::string>& texts) override {
    std::vector<orchestration::Embedding> out;
    for (const auto& t : texts) {
      Rng rng(std::hash<std::string>{}(t));
      orchestration::Embedding v(8);
      for (auto& x : v) x = rng.normal();
      out.push_back(v);
    }
    return out;
  }

  std::vector<orchestration::ChatRequest> requests;

 private:
  Reply reply_;
  std::mutex mu_;
};

// Replies from a fixed queue, then repeats the last reply.
inline ScriptedBackend::Reply queue(std::vector<std::string> replies) {
  auto q = std::make_shared<std::deque<std::string>>(replies.begin(), replies.end());
  auto m = std::make_shared<std::mutex>();
  return [q, m](const orchestration::ChatRequest&) {
    std::lock_guard lock(*m);
    std::string r = q->front();
    if (q->size() > 1) q->pop_front();
    return r;
  };
}

}  // namespace testing_support
