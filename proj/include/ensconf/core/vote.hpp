#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ensconf/core/types.hpp"
#include "ensconf/util/text.hpp"

namespace ensconf {

struct VoteResult {
  Label majority;
  double vote_confidence = 0.0;
  bool tie = false;
  int top_count = 0;
};

inline bool same_label(std::string_view a, std::string_view b) {
  return text::normalize_label(a) == text::normalize_label(b);
}

// Parse failures (nullopt) count toward K but never toward a label. Ties go to
// the label held by the lowest agent index.
inline VoteResult majority_vote(std::span<const std::optional<Label>> answers) {
  if (answers.empty()) throw std::invalid_argument("majority_vote: no answers");
  struct Tally {
    Label label;
    std::string key;
    int count = 0;
  };
  std::vector<Tally> tallies;  // in order of first appearance == lowest agent index
  for (const auto& a : answers) {
    if (!a) continue;
    std::string key = text::normalize_label(*a);
    bool found = false;
    for (auto& t : tallies) {
      if (t.key == key) {
        ++t.count;
        found = true;
        break;
      }
    }
    if (!found) tallies.push_back({*a, std::move(key), 1});
  }
  if (tallies.empty()) {
    throw AbstainError("majority_vote: all " + std::to_string(answers.size()) +
                       " answers unparseable");
  }
  const Tally* best = &tallies.front();
  int holders = 0;
  for (const auto& t : tallies) {
    if (t.count > best->count) best = &t;
  }
  for (const auto& t : tallies) {
    if (t.count == best->count) ++holders;
  }
  return {best->label, static_cast<double>(best->count) / static_cast<double>(answers.size()),
          holders >= 2, best->count};
}

inline VoteResult majority_vote(const std::vector<AgentTranscript>& transcripts) {
  std::vector<std::optional<Label>> answers;
  answers.reserve(transcripts.size());
  for (const auto& t : transcripts) answers.push_back(t.answer);
  return majority_vote(answers);
}

inline Tier tier_of(double vote_confidence) {
  if (!(vote_confidence > 0.0 && vote_confidence <= 1.0)) {
    throw std::invalid_argument("tier_of: vote confidence outside (0,1]");
  }
  constexpr double kEps = 1e-12;
  if (vote_confidence >= 1.0 - kEps) return Tier::unanimous;
  if (vote_confidence >= 0.8 - kEps) return Tier::strong;
  return Tier::weak;
}

inline bool label_correctness(std::string_view answer, std::string_view gold) {
  return same_label(answer, gold);
}

inline bool label_correctness(const EnsembleRecord& r) {
  return label_correctness(r.majority_answer, r.question.gold);
}

inline EnsembleRecord make_ensemble(QuestionRecord question,
                                    std::vector<AgentTranscript> transcripts) {
  const VoteResult vote = majority_vote(transcripts);
  EnsembleRecord r;
  r.question = std::move(question);
  r.transcripts = std::move(transcripts);
  r.majority_answer = vote.majority;
  r.vote_confidence = vote.vote_confidence;
  r.tie = vote.tie;
  r.tier = tier_of(vote.vote_confidence);
  r.correct = label_correctness(r);
  return r;
}

// True at agent indices whose answer matches the majority label.
inline std::vector<bool> majority_mask(const EnsembleRecord& r) {
  std::vector<bool> mask(r.transcripts.size(), false);
  for (std::size_t k = 0; k < r.transcripts.size(); ++k) {
    const auto& a = r.transcripts[k].answer;
    mask[k] = a && same_label(*a, r.majority_answer);
  }
  return mask;
}

}  // namespace ensconf
