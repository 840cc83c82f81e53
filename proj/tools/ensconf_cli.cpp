#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "ensconf/ensconf.hpp"

using namespace ensconf;
using namespace ensconf::experiments;

namespace {

struct EvalFlags {
  int folds = 5;
  std::uint64_t seed = 42;
  int bootstrap = 1000;
  std::size_t threads = 1;

  void attach(CLI::App* app) {
    app->add_option("--folds", folds, "cross-validation folds")->capture_default_str();
    app->add_option("--seed", seed, "seed for folds, bootstrap and training")->capture_default_str();
    app->add_option("--bootstrap", bootstrap, "bootstrap resamples")->capture_default_str();
    app->add_option("--threads", threads, "worker threads")->capture_default_str();
  }

  EvaluationOptions options() const {
    EvaluationOptions o;
    o.folds = folds;
    o.seed = seed;
    o.bootstrap_resamples = bootstrap;
    o.threads = threads;
    o.train.mlp.seed = seed;
    return o;
  }
};

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  const std::filesystem::path p(out);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << j.dump(2) << '\n';
  if (!f) throw Error("cannot write " + out);
  spdlog::info("wrote {}", out);
}

std::vector<AnalyzedRecord> load_records(const std::string& path) {
  auto rs = read_records(path);
  if (rs.empty()) throw Error("no records in " + path);
  return rs;
}

ScoreTable pooled_scores(const std::vector<AnalyzedRecord>& records, const EvaluationOptions& opt) {
  std::vector<ScoreTable> parts;
  for (const auto& [b, recs] : by_benchmark(records)) parts.push_back(score_methods(recs, opt));
  return concatenate(parts);
}

// id,confidence,correct with a header row, as written by the run command.
baselines::MethodScore read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  baselines::MethodScore s;
  std::string line;
  std::getline(in, line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, conf, correct;
    if (!std::getline(ss, id, ',') || !std::getline(ss, conf, ',') || !std::getline(ss, correct)) {
      throw Error(path + ":" + std::to_string(lineno) + ": expected id,confidence,correct");
    }
    try {
      s.add(id, std::stod(conf), correct == "1" || correct == "true");
    } catch (const std::logic_error&) {
      throw Error(path + ":" + std::to_string(lineno) + ": bad confidence '" + conf + "'");
    }
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble confidence estimation toolkit"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "normalize a benchmark file into the store layout");
  std::string ingest_kind, ingest_input, ingest_out;
  ingest_cmd->add_option("--benchmark", ingest_kind, "strategyqa | mmlu | truthfulqa | arc_challenge")->required();
  ingest_cmd->add_option("--input", ingest_input, "source JSON or JSONL file")->required();
  ingest_cmd->add_option("--out", ingest_out, "store root")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "run the full pipeline from a config file");
  std::string run_config, run_mock, run_out;
  std::vector<std::string> run_benchmarks;
  run_cmd->add_option("--config", run_config, "run config JSON")->required();
  run_cmd->add_option("--benchmark", run_benchmarks, "restrict to these benchmarks");
  run_cmd->add_option("--mock", run_mock, "mock fixture directory (no network)");
  run_cmd->add_option("--out", run_out, "output directory (overrides config)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic analyzed ensembles");
  std::string synth_spec, synth_out;
  std::uint64_t synth_seed = 42;
  std::size_t synth_n = 2000;
  synth_cmd->add_option("--spec", synth_spec, "SyntheticSpec JSON (default: structure-signal spec)");
  synth_cmd->add_option("--seed", synth_seed)->capture_default_str();
  synth_cmd->add_option("--records", synth_n)->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "records JSONL")->required();

  // train-eval
  auto* train_cmd = app.add_subcommand("train-eval", "cross-validate a learned estimator on records");
  std::string train_records, train_layout = "M1", train_model = "logistic", train_out, train_model_out;
  EvalFlags train_flags;
  train_cmd->add_option("--records", train_records, "records JSONL")->required();
  train_cmd->add_option("--layout", train_layout, "M1 | M2 | M3")->capture_default_str();
  train_cmd->add_option("--model", train_model, "logistic | mlp")->capture_default_str();
  train_cmd->add_option("--out", train_out, "metrics JSON (default stdout)");
  train_cmd->add_option("--model-out", train_model_out, "write a model fitted on all records");
  train_flags.attach(train_cmd);

  // tiers / crossbm / ablate / cost / report share the records input
  std::string rec_path, out_path;
  EvalFlags flags;
  auto* tiers_cmd = app.add_subcommand("tiers", "consensus-tier breakdown");
  auto* cross_cmd = app.add_subcommand("crossbm", "leave-one-benchmark-out generalization");
  auto* ablate_cmd = app.add_subcommand("ablate", "feature and agent-count ablations");
  auto* cost_cmd = app.add_subcommand("cost", "extra calls and tokens per method");
  auto* report_cmd = app.add_subcommand("report", "full evaluation report from records");
  std::string cross_layout = "M1", cross_model = "logistic";
  cross_cmd->add_option("--layout", cross_layout)->capture_default_str();
  cross_cmd->add_option("--model", cross_model)->capture_default_str();
  for (auto* c : {tiers_cmd, cross_cmd, ablate_cmd, cost_cmd, report_cmd}) {
    c->add_option("--records", rec_path, "records JSONL")->required();
    flags.attach(c);
  }
  for (auto* c : {tiers_cmd, cross_cmd, ablate_cmd, cost_cmd}) c->add_option("--out", out_path, "JSON output");
  report_cmd->add_option("--out", out_path, "output directory")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "metrics for a scores CSV");
  std::string eval_scores, eval_out;
  int eval_bootstrap = 1000;
  std::uint64_t eval_seed = 42;
  eval_cmd->add_option("--scores", eval_scores, "CSV with id,confidence,correct")->required();
  eval_cmd->add_option("--out", eval_out, "metrics JSON (default stdout)");
  eval_cmd->add_option("--bootstrap", eval_bootstrap)->capture_default_str();
  eval_cmd->add_option("--seed", eval_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*ingest_cmd) {
      const Benchmark kind = parse_benchmark(ingest_kind);
      const auto questions = ingestion::load_benchmark(kind, ingest_input);
      const auto dir = std::filesystem::path(ingest_out) / to_string(kind);
      std::filesystem::create_directories(dir);
      std::ofstream out(dir / "questions.jsonl", std::ios::binary | std::ios::trunc);
      for (const auto& q : questions) out << json(q).dump() << '\n';
      if (!out) throw Error("cannot write " + (dir / "questions.jsonl").string());
      spdlog::info("{}: {} questions -> {}", to_string(kind), questions.size(), (dir / "questions.jsonl").string());
    } else if (*run_cmd) {
      auto config = load_run_config(run_config);
      if (!run_benchmarks.empty()) {
        std::vector<BenchmarkSource> keep;
        for (const auto& name : run_benchmarks) {
          const Benchmark b = parse_benchmark(name);
          bool found = false;
          for (const auto& s : config.benchmarks) {
            if (s.kind == b) {
              keep.push_back(s);
              found = true;
            }
          }
          if (!found) throw Error("benchmark " + name + " is not listed in " + run_config);
        }
        config.benchmarks = keep;
      }
      if (!run_mock.empty()) config.mock_fixture = run_mock;
      if (!run_out.empty()) config.output_dir = run_out;
      const auto result = run_pipeline(config);
      std::cout << fmt::format("{} records, {} network calls, outputs in {}\n", result.records.size(),
                               result.network_calls(), config.output_dir);
    } else if (*synth_cmd) {
      SyntheticSpec spec = structure_signal_spec(synth_seed, synth_n);
      if (!synth_spec.empty()) {
        std::ifstream in(synth_spec);
        if (!in) throw Error("cannot open " + synth_spec);
        spec = json::parse(in).get<SyntheticSpec>();
      }
      const auto records = synth_generate(spec);
      const std::filesystem::path p(synth_out);
      if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
      write_records(synth_out, records);
      spdlog::info("{} synthetic records -> {}", records.size(), synth_out);
    } else if (*train_cmd) {
      const auto records = load_records(train_records);
      const Layout layout = parse_layout(train_layout);
      const ModelKind kind = models::parse_model_kind(train_model);
      const auto opt = train_flags.options();
      const metrics::EvaluateOptions mopt{opt.bootstrap_resamples, opt.seed, opt.threads};
      json out{{"layout", to_string(layout)}, {"model", train_model}, {"benchmarks", json::object()}};
      std::vector<double> pooled_conf;
      std::vector<bool> pooled_y;
      for (const auto& [b, recs] : by_benchmark(records)) {
        const auto y = labels_of(recs);
        const auto cv = models::cross_validate(feature_rows(recs, layout), y, kind, opt.train, opt.folds, opt.seed,
                                               opt.threads);
        out["benchmarks"][std::string(to_string(b))] = metrics::evaluate(metrics::as_scores(cv.oof), y, mopt);
        pooled_conf.insert(pooled_conf.end(), cv.oof.data(), cv.oof.data() + cv.oof.size());
        pooled_y.insert(pooled_y.end(), y.begin(), y.end());
      }
      out["pooled"] = metrics::evaluate(pooled_conf, pooled_y, mopt);
      if (!train_model_out.empty()) {
        const auto rows = feature_rows(records, layout);
        auto c = models::fit_classifier(features::to_matrix(rows), models::to_vector(labels_of(records)), kind,
                                        opt.train);
        c.layout = layout;
        c.feature_names = features::feature_names(layout);
        emit(models::to_json(c), train_model_out);
      }
      emit(out, train_out);
    } else if (*tiers_cmd) {
      const auto records = load_records(rec_path);
      const auto opt = flags.options();
      std::vector<std::string> notes;
      json out{{"tiers", tier_table(records, pooled_scores(records, opt), notes, "pooled")},
               {"profile", weak_tier_profile(records)}};
      out["notes"] = notes;
      emit(out, out_path);
    } else if (*cross_cmd) {
      const auto records = load_records(rec_path);
      const auto rows = cross_benchmark(by_benchmark(records), parse_layout(cross_layout),
                                        models::parse_model_kind(cross_model), flags.options());
      emit(to_json_rows(rows), out_path);
    } else if (*ablate_cmd) {
      const auto records = load_records(rec_path);
      std::vector<std::string> notes;
      json out = ablate(records, flags.options(), {}, notes, "pooled");
      out["notes"] = notes;
      emit(out, out_path);
    } else if (*cost_cmd) {
      const auto records = load_records(rec_path);
      const auto opt = flags.options();
      std::map<Method, double> auroc;
      for (const auto& [m, s] : pooled_scores(records, opt)) {
        auroc[m] = metrics::auroc_value(s.confidence, s.correct).value;
      }
      emit(to_json_cost(records, cost_report(records, opt.methods, auroc)), out_path);
    } else if (*report_cmd) {
      const auto records = load_records(rec_path);
      const auto opt = flags.options();
      const json report = evaluate_records(records, opt, {}, {{"records", rec_path}});
      write_outputs(out_path, records, report, opt);
      std::cout << fmt::format("report for {} records in {}\n", records.size(), out_path);
    } else if (*eval_cmd) {
      const auto s = read_scores_csv(eval_scores);
      emit(metrics::evaluate(s.confidence, s.correct, {eval_bootstrap, eval_seed, 1}), eval_out);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
