#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ensconf/ingestion/cache_key.hpp"
#include "ensconf/ingestion/store.hpp"
#include "ensconf/orchestration/backend.hpp"
#include "ensconf/orchestration/team.hpp"

namespace ensconf::orchestration {

// Retries TransientError with exponential backoff; other errors pass through.
class RetryingBackend final : public Backend {
 public:
  using Sleep = std::function<void(std::chrono::milliseconds)>;

  RetryingBackend(Backend& inner, RetryPolicy policy,
                  Sleep sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : inner_(inner), policy_(policy), sleep_(std::move(sleep)) {}

  ChatResponse chat(const ChatRequest& request) override {
    return attempt([&] { return inner_.chat(request); });
  }

  std::vector<Embedding> embed(const std::string& model,
                               const std::vector<std::string>& texts) override {
    return attempt([&] { return inner_.embed(model, texts); });
  }

 private:
  template <typename Fn>
  auto attempt(Fn&& fn) -> decltype(fn()) {
    auto backoff = policy_.initial_backoff;
    for (int i = 1;; ++i) {
      try {
        return fn();
      } catch (const TransientError&) {
        if (i >= policy_.max_attempts) throw;
        sleep_(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<long>(static_cast<double>(backoff.count()) * policy_.multiplier));
      }
    }
  }

  Backend& inner_;
  RetryPolicy policy_;
  Sleep sleep_;
};

// Counts calls reaching the wrapped backend.
class CountingBackend final : public Backend {
 public:
  explicit CountingBackend(Backend& inner) : inner_(inner) {}

  ChatResponse chat(const ChatRequest& request) override {
    ++chat_calls_;
    return inner_.chat(request);
  }

  std::vector<Embedding> embed(const std::string& model,
                               const std::vector<std::string>& texts) override {
    ++embed_calls_;
    return inner_.embed(model, texts);
  }

  std::size_t chat_calls() const { return chat_calls_; }
  std::size_t embed_calls() const { return embed_calls_; }
  std::size_t total_calls() const { return chat_calls_ + embed_calls_; }

 private:
  Backend& inner_;
  std::atomic<std::size_t> chat_calls_{0};
  std::atomic<std::size_t> embed_calls_{0};
};

// Cache-first backend. Chat responses are keyed by the full request payload;
// embeddings by (model, text). Entries live in the store under bucket "_calls".
class CachingBackend final : public Backend {
 public:
  CachingBackend(Backend& inner, ingestion::TranscriptStore& store)
      : inner_(inner), store_(store) {}

  ChatResponse chat(const ChatRequest& request) override {
    const auto key = ingestion::cache_key(request).hex;
    if (auto hit = store_.get(kBucket, "chat", key, "")) return hit->get<ChatResponse>();
    ChatResponse r = inner_.chat(request);
    return json::parse(store_.put_if_absent(kBucket, "chat", key, "", json(r)))
        .get<ChatResponse>();
  }

  std::vector<Embedding> embed(const std::string& model,
                               const std::vector<std::string>& texts) override {
    std::vector<Embedding> out(texts.size());
    std::vector<std::size_t> missing;
    std::vector<std::string> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      keys[i] = ingestion::embedding_cache_key(model, texts[i]).hex;
      if (auto hit = store_.get(kBucket, "embeddings", keys[i], "")) {
        out[i] = hit->get<Embedding>();
      } else {
        missing.push_back(i);
      }
    }
    if (missing.empty()) return out;
    std::vector<std::string> batch;
    batch.reserve(missing.size());
    for (std::size_t i : missing) batch.push_back(texts[i]);
    auto fetched = inner_.embed(model, batch);
    if (fetched.size() != batch.size()) throw ProtocolError("embedding backend returned wrong count");
    for (std::size_t j = 0; j < missing.size(); ++j) {
      // Duplicate texts in one batch share a key; the first write wins.
      out[missing[j]] = json::parse(
                            store_.put_if_absent(kBucket, "embeddings", keys[missing[j]], "", json(fetched[j])))
                            .get<Embedding>();
    }
    return out;
  }

 private:
  static constexpr const char* kBucket = "_calls";
  Backend& inner_;
  ingestion::TranscriptStore& store_;
};

}  // namespace ensconf::orchestration
