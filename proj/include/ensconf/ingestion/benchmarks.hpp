#pragma once

// Benchmark loaders. Each source is JSONL (one row per line) or a single JSON
// array; the per-benchmark field mapping is documented in docs/benchmarks.md.

#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ensconf/core/json.hpp"
#include "ensconf/core/types.hpp"
#include "ensconf/util/text.hpp"

namespace ensconf::ingestion {

struct LoadOptions {
  // MMLU rows whose "subject" is outside this list are skipped. Empty keeps all.
  std::vector<std::string> mmlu_subjects{"logical_fallacies", "philosophy",
                                         "professional_medicine"};
};

inline std::string option_letter(std::size_t index) {
  if (index >= 26) throw Error("option index " + std::to_string(index) + " beyond Z");
  return std::string(1, static_cast<char>('A' + index));
}

namespace detail {

struct RawRow {
  json value;
  std::string where;  // "file:line" or "file[entry]"
  std::size_t ordinal = 0;
};

inline std::vector<RawRow> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open benchmark source " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string content = buf.str();
  std::vector<RawRow> rows;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return rows;

  if (content[first] == '[') {
    json arr;
    try {
      arr = json::parse(content);
    } catch (const json::parse_error& e) {
      throw Error(path.string() + ": malformed JSON array: " + e.what());
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      rows.push_back({arr[i], path.string() + "[entry " + std::to_string(i + 1) + "]", i});
    }
    return rows;
  }

  std::istringstream lines(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      rows.push_back({json::parse(line), where, rows.size()});
    } catch (const json::parse_error& e) {
      throw Error(where + ": malformed JSON row: " + e.what());
    }
  }
  return rows;
}

inline const json& require(const json& row, const char* key, const std::string& where) {
  if (!row.is_object()) throw Error(where + ": row is not a JSON object");
  auto it = row.find(key);
  if (it == row.end() || it->is_null()) {
    throw Error(where + ": missing required field '" + key + "'");
  }
  return *it;
}

inline std::string require_string(const json& row, const char* key, const std::string& where) {
  const json& v = require(row, key, where);
  if (!v.is_string()) throw Error(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline std::string id_or(const json& row, const char* key, std::string fallback) {
  auto it = row.find(key);
  if (it != row.end() && it->is_string()) return it->get<std::string>();
  if (it != row.end() && it->is_number_integer()) return std::to_string(it->get<long>());
  return fallback;
}

inline QuestionRecord strategyqa_row(const RawRow& r) {
  QuestionRecord q;
  q.benchmark = Benchmark::strategyqa;
  q.answer_format = AnswerFormat::yes_no;
  q.choice_count = 2;
  q.text = require_string(r.value, "question", r.where);
  q.id = id_or(r.value, "qid", id_or(r.value, "id", "strategyqa-" + std::to_string(r.ordinal)));
  const json& ans = require(r.value, "answer", r.where);
  if (ans.is_boolean()) {
    q.gold = ans.get<bool>() ? "yes" : "no";
  } else if (ans.is_string()) {
    const std::string a = text::normalize_label(ans.get<std::string>());
    if (a == "yes" || a == "true") {
      q.gold = "yes";
    } else if (a == "no" || a == "false") {
      q.gold = "no";
    } else {
      throw Error(r.where + ": answer '" + ans.get<std::string>() + "' is not yes/no");
    }
  } else {
    throw Error(r.where + ": answer must be boolean or yes/no string");
  }
  return q;
}

inline std::string gold_from_index_or_letter(const json& ans, std::size_t n,
                                             const std::string& where) {
  std::size_t idx = n;
  if (ans.is_number_integer()) {
    const long v = ans.get<long>();
    if (v >= 0) idx = static_cast<std::size_t>(v);
  } else if (ans.is_string()) {
    const std::string a = text::trim(ans.get<std::string>());
    if (a.size() == 1 && a[0] >= 'A' && a[0] <= 'Z') idx = static_cast<std::size_t>(a[0] - 'A');
    if (a.size() == 1 && a[0] >= 'a' && a[0] <= 'z') idx = static_cast<std::size_t>(a[0] - 'a');
  }
  if (idx >= n) throw Error(where + ": gold answer out of range for " + std::to_string(n) +
                            " choices");
  return option_letter(idx);
}

inline std::vector<std::string> string_list(const json& v, const std::string& where,
                                            const char* what) {
  if (!v.is_array() || v.size() < 2) {
    throw Error(where + ": '" + what + "' must be an array of at least two options");
  }
  std::vector<std::string> out;
  for (const auto& c : v) {
    if (!c.is_string()) throw Error(where + ": non-string option in '" + what + "'");
    out.push_back(c.get<std::string>());
  }
  return out;
}

inline std::optional<QuestionRecord> mmlu_row(const RawRow& r, const LoadOptions& opt,
                                              const std::filesystem::path& path) {
  const std::string subject = r.value.is_object() ? r.value.value("subject", std::string{}) : "";
  if (!subject.empty() && !opt.mmlu_subjects.empty() &&
      std::find(opt.mmlu_subjects.begin(), opt.mmlu_subjects.end(), subject) ==
          opt.mmlu_subjects.end()) {
    return std::nullopt;
  }
  QuestionRecord q;
  q.benchmark = Benchmark::mmlu;
  q.answer_format = AnswerFormat::multiple_choice;
  q.text = require_string(r.value, "question", r.where);
  q.choices = string_list(require(r.value, "choices", r.where), r.where, "choices");
  q.choice_count = static_cast<int>(q.choices.size());
  q.gold = gold_from_index_or_letter(require(r.value, "answer", r.where), q.choices.size(),
                                     r.where);
  q.id = id_or(r.value, "id", "mmlu-" + (subject.empty() ? "" : subject + "-") +
                                  std::to_string(r.ordinal));
  q.provenance = path.filename().string();
  if (!subject.empty()) q.provenance += ";subject=" + subject;
  if (r.value.contains("split") && r.value["split"].is_string()) {
    q.provenance += ";split=" + r.value["split"].get<std::string>();
  }
  return q;
}

inline QuestionRecord truthfulqa_row(const RawRow& r) {
  QuestionRecord q;
  q.benchmark = Benchmark::truthfulqa;
  q.answer_format = AnswerFormat::multiple_choice;
  q.text = require_string(r.value, "question", r.where);
  const json& targets = require(r.value, "mc1_targets", r.where);
  q.choices = string_list(require(targets, "choices", r.where), r.where, "mc1_targets.choices");
  const json& labels = require(targets, "labels", r.where);
  if (!labels.is_array() || labels.size() != q.choices.size()) {
    throw Error(r.where + ": mc1_targets.labels must align with choices");
  }
  std::optional<std::size_t> gold;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].is_number() && labels[i].get<double>() == 1.0) {
      if (gold) throw Error(r.where + ": more than one true option in mc1_targets");
      gold = i;
    }
  }
  if (!gold) throw Error(r.where + ": missing gold label (no option marked 1)");
  q.choice_count = static_cast<int>(q.choices.size());
  q.gold = option_letter(*gold);
  q.id = id_or(r.value, "id", "truthfulqa-" + std::to_string(r.ordinal));
  return q;
}

inline QuestionRecord arc_row(const RawRow& r) {
  QuestionRecord q;
  q.benchmark = Benchmark::arc_challenge;
  q.answer_format = AnswerFormat::multiple_choice;
  const json& question = require(r.value, "question", r.where);
  std::vector<std::string> labels;
  if (question.is_object()) {
    // AI2 layout: question.stem + question.choices[{text,label}]
    q.text = require_string(question, "stem", r.where);
    const json& choices = require(question, "choices", r.where);
    if (!choices.is_array() || choices.size() < 2) throw Error(r.where + ": too few choices");
    for (const auto& c : choices) {
      q.choices.push_back(require_string(c, "text", r.where));
      labels.push_back(require_string(c, "label", r.where));
    }
  } else if (question.is_string()) {
    // Flattened layout: question + choices{text[], label[]}
    q.text = question.get<std::string>();
    const json& choices = require(r.value, "choices", r.where);
    q.choices = string_list(require(choices, "text", r.where), r.where, "choices.text");
    for (const auto& l : require(choices, "label", r.where)) labels.push_back(l.get<std::string>());
    if (labels.size() != q.choices.size()) throw Error(r.where + ": choice labels misaligned");
  } else {
    throw Error(r.where + ": 'question' must be a string or object");
  }
  const std::string key = require_string(r.value, "answerKey", r.where);
  auto it = std::find(labels.begin(), labels.end(), key);
  if (it == labels.end()) throw Error(r.where + ": answerKey '" + key + "' not among labels");
  q.choice_count = static_cast<int>(q.choices.size());
  q.gold = option_letter(static_cast<std::size_t>(it - labels.begin()));
  q.id = id_or(r.value, "id", "arc-" + std::to_string(r.ordinal));
  return q;
}

}  // namespace detail

inline std::vector<QuestionRecord> load_benchmark(Benchmark kind,
                                                  const std::filesystem::path& source,
                                                  const LoadOptions& options = {}) {
  const auto rows = detail::read_rows(source);
  std::vector<QuestionRecord> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    switch (kind) {
      case Benchmark::strategyqa: out.push_back(detail::strategyqa_row(row)); break;
      case Benchmark::mmlu:
        if (auto q = detail::mmlu_row(row, options, source)) out.push_back(std::move(*q));
        break;
      case Benchmark::truthfulqa: out.push_back(detail::truthfulqa_row(row)); break;
      case Benchmark::arc_challenge: out.push_back(detail::arc_row(row)); break;
    }
    if (!out.empty() && out.back().provenance.empty()) {
      out.back().provenance = source.filename().string();
    }
  }
  if (out.empty()) {
    spdlog::warn("{}: no {} records loaded", source.string(), to_string(kind));
  } else {
    spdlog::info("{}: loaded {} {} records", source.string(), out.size(), to_string(kind));
  }
  return out;
}

inline std::vector<QuestionRecord> load_benchmark(std::string_view kind,
                                                  const std::filesystem::path& source,
                                                  const LoadOptions& options = {}) {
  return load_benchmark(parse_benchmark(kind), source, options);
}

}  // namespace ensconf::ingestion
