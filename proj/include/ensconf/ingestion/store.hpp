#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>

#include "ensconf/core/json.hpp"
#include "ensconf/util/error.hpp"

namespace ensconf::ingestion {

namespace stage {
inline constexpr const char* agents = "agents";
inline constexpr const char* verbalized = "verbalized";
inline constexpr const char* structure = "structure";
inline constexpr const char* aggregate = "aggregate";
inline constexpr const char* embeddings = "embeddings";
}  // namespace stage

// Append-only JSONL store laid out as <root>/<bucket>/<stage>.jsonl, where the
// bucket is normally a benchmark name. Each line holds
// {"key", "config", "payload"}; (key, config) is written at most once per stage.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path root) : root_(std::move(root)) {}

  TranscriptStore(const TranscriptStore&) = delete;
  TranscriptStore& operator=(const TranscriptStore&) = delete;

  const std::filesystem::path& root() const { return root_; }

  std::optional<json> get(const std::string& bucket, const std::string& stage,
                          const std::string& key, const std::string& config) const {
    auto raw = get_raw(bucket, stage, key, config);
    if (!raw) return std::nullopt;
    return json::parse(*raw);
  }

  // Serialized payload exactly as stored.
  std::optional<std::string> get_raw(const std::string& bucket, const std::string& stage,
                                     const std::string& key, const std::string& config) const {
    const File& f = load(bucket, stage);
    std::shared_lock lock(mu_);
    auto it = f.entries.find({key, config});
    if (it == f.entries.end()) {
      ++misses_;
      return std::nullopt;
    }
    ++hits_;
    return it->second;
  }

  // Returns the stored payload. Re-putting an identical payload is a no-op;
  // a different payload for an existing (key, config) is an error.
  std::string put(const std::string& bucket, const std::string& stage, const std::string& key,
                  const std::string& config, const json& payload) {
    return write(bucket, stage, key, config, payload, false);
  }

  // Like put, but an existing entry wins over a different payload (first writer wins).
  std::string put_if_absent(const std::string& bucket, const std::string& stage,
                            const std::string& key, const std::string& config,
                            const json& payload) {
    return write(bucket, stage, key, config, payload, true);
  }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  std::size_t writes() const { return writes_; }
  void reset_counters() {
    hits_ = 0;
    misses_ = 0;
    writes_ = 0;
  }

 private:
  struct File {
    std::map<std::pair<std::string, std::string>, std::string> entries;
  };

  std::string write(const std::string& bucket, const std::string& stage, const std::string& key,
                    const std::string& config, const json& payload, bool keep_existing) {
    File& f = load(bucket, stage);
    std::string dumped = payload.dump();
    std::unique_lock lock(mu_);
    auto it = f.entries.find({key, config});
    if (it != f.entries.end()) {
      if (it->second != dumped && !keep_existing) {
        throw Error("store: conflicting write for " + bucket + "/" + stage + " key '" + key + "'");
      }
      return it->second;
    }
    const auto path = file_path(bucket, stage);
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error("store: cannot create " + path.parent_path().string() + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error("store: cannot open " + path.string() + " for writing");
    json line{{"key", key}, {"config", config}};
    // Embed the payload text verbatim so reads return identical bytes.
    std::string text = line.dump();
    text.pop_back();
    text += ",\"payload\":" + dumped + "}\n";
    out << text;
    out.flush();
    if (!out) throw Error("store: write failed for " + path.string());
    ++writes_;
    return f.entries.emplace(std::make_pair(key, config), std::move(dumped)).first->second;
  }

  static void check_component(const std::string& s) {
    if (s.empty() || s.find('/') != std::string::npos || s.find("..") != std::string::npos) {
      throw Error("store: invalid path component '" + s + "'");
    }
  }

  std::filesystem::path file_path(const std::string& bucket, const std::string& stage) const {
    return root_ / bucket / (stage + ".jsonl");
  }

  File& load(const std::string& bucket, const std::string& stage) const {
    check_component(bucket);
    check_component(stage);
    const std::string id = bucket + "/" + stage;
    {
      std::shared_lock lock(mu_);
      auto it = files_.find(id);
      if (it != files_.end()) return it->second;
    }
    std::unique_lock lock(mu_);
    auto [it, inserted] = files_.try_emplace(id);
    if (!inserted) return it->second;
    const auto path = file_path(bucket, stage);
    std::ifstream in(path, std::ios::binary);
    if (!in) return it->second;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
      const std::size_t this_offset = offset;
      offset += line.size() + 1;
      if (line.empty()) continue;
      try {
        json j = json::parse(line);
        const auto& key = j.at("key").get_ref<const std::string&>();
        const auto& config = j.at("config").get_ref<const std::string&>();
        it->second.entries.emplace(std::make_pair(key, config), j.at("payload").dump());
      } catch (const json::exception& e) {
        files_.erase(it);
        throw Error("store: corrupt line in " + path.string() + " at byte offset " +
                    std::to_string(this_offset) + ": " + e.what());
      }
    }
    return it->second;
  }

  std::filesystem::path root_;
  mutable std::shared_mutex mu_;
  mutable std::map<std::string, File> files_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> writes_{0};
};

}  // namespace ensconf::ingestion
