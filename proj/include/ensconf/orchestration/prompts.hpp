#pragma once

// Prompt templates. Their text is part of every request payload, so editing a
// template changes the call cache key and invalidates the affected stage.

#include <string>
#include <vector>

#include "ensconf/core/types.hpp"
#include "ensconf/core/vote.hpp"
#include "ensconf/util/text.hpp"

namespace ensconf::orchestration::prompts {

inline constexpr const char* kTemplateVersion = "v1";

inline constexpr const char* kVerbalizedFollowup =
    "On a scale from 0 to 100, how confident are you that your final answer above is correct? "
    "Reply with a single integer between 0 and 100.";

inline constexpr const char* kAnalysisSystem =
    "You are an expert analyst of multi-agent reasoning. You respond with a single JSON object "
    "and nothing else.";

inline constexpr const char* kAggregatorSystem = "You are a JSON-only responder.";

inline constexpr const char* kJsonRetryNudge =
    "Your previous reply could not be parsed. Reply again with only the JSON object.";

inline constexpr const char* kNumberRetryNudge =
    "Your previous reply could not be parsed. Reply with only an integer from 0 to 100.";

inline std::string question_block(const QuestionRecord& q) {
  std::string s = "Question: " + q.text + "\n";
  if (q.answer_format == AnswerFormat::multiple_choice) {
    s += "Options:\n";
    for (std::size_t i = 0; i < q.choices.size(); ++i) {
      s += std::string(1, static_cast<char>('A' + i)) + ". " + q.choices[i] + "\n";
    }
  }
  return s;
}

inline std::string answer_instruction(const QuestionRecord& q) {
  if (q.answer_format == AnswerFormat::yes_no) {
    return "Think it through step by step, then state your final answer on the last line as "
           "'Answer: yes' or 'Answer: no'.";
  }
  const char last = static_cast<char>('A' + q.choice_count - 1);
  return std::string("Think it through step by step, then state your final answer on the last "
                     "line as 'Answer: <letter>' using one letter from A to ") +
         last + ".";
}

inline std::string agent_user(const QuestionRecord& q) {
  return question_block(q) + "\n" + answer_instruction(q);
}

inline std::string agent_label(const AgentTranscript& t) {
  return "Agent " + std::to_string(t.agent_index + 1) + " (" + t.role_name + ")";
}

// Agents grouped as MAJORITY / MINORITY with their answers, then the six score
// definitions and the JSON schema.
inline std::string analysis_user(const EnsembleRecord& r) {
  const auto mask = majority_mask(r);
  std::string s = question_block(r.question) + "\n";
  s += "MAJORITY (answer " + r.majority_answer + "):\n";
  for (std::size_t k = 0; k < r.transcripts.size(); ++k) {
    if (!mask[k]) continue;
    s += "--- " + agent_label(r.transcripts[k]) + ", answer " + *r.transcripts[k].answer + "\n" +
         r.transcripts[k].reasoning + "\n";
  }
  s += "\nMINORITY:\n";
  for (std::size_t k = 0; k < r.transcripts.size(); ++k) {
    if (mask[k]) continue;
    const auto& t = r.transcripts[k];
    s += "--- " + agent_label(t) + ", answer " + (t.answer ? *t.answer : "unparsed") + "\n" +
         t.reasoning + "\n";
  }
  s += R"(
Analyze the disagreement between the majority and the minority and score it:
- evidence_overlap (0-1): degree to which majority and minority agents cite the same facts or evidence.
- minority_new_info (0-1): extent of genuinely new arguments the minority introduces.
- minority_strength (0-1): logical soundness of the minority's reasoning, regardless of whether it is correct.
- majority_conf_language (0-1): certainty expressed in the majority's language (0 = hedging, 1 = assertive).
- reasoning_complexity (0-1): complexity of the overall reasoning across agents.
- divergence_depth: where the reasoning splits: "early" (initial framing), "middle" (intermediate steps), or "late" (only the final conclusion).

Respond with exactly one JSON object:
{"evidence_overlap": <number>, "minority_new_info": <number>, "minority_strength": <number>, "majority_conf_language": <number>, "reasoning_complexity": <number>, "divergence_depth": "early|middle|late"})";
  return s;
}

inline std::string aggregator_user(const EnsembleRecord& r, std::size_t truncate_chars) {
  std::string s = question_block(r.question) + "\n";
  s += std::to_string(r.transcripts.size()) + " agents answered independently.\n\n";
  for (const auto& t : r.transcripts) {
    s += "Agent " + std::to_string(t.agent_index + 1) + " response:\n" +
         text::utf8_prefix(t.reasoning, truncate_chars) + "\n\n";
  }
  const std::string label_hint = r.question.answer_format == AnswerFormat::yes_no
                                     ? "\"yes\" or \"no\""
                                     : "an option letter";
  s += "Read all responses, decide the correct answer yourself, and reply with JSON only: "
       "{\"answer\": <" + label_hint + ">, \"confidence\": <number between 0 and 1>}";
  return s;
}

}  // namespace ensconf::orchestration::prompts
