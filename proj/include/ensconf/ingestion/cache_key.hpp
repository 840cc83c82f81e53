#pragma once

#include <string>
#include <vector>

#include "ensconf/core/json.hpp"
#include "ensconf/orchestration/backend.hpp"
#include "ensconf/util/hash.hpp"

namespace ensconf::ingestion {

struct CallCacheKey {
  std::string hex;

  bool operator==(const CallCacheKey&) const = default;
  auto operator<=>(const CallCacheKey&) const = default;
};

// SHA-256 over the canonical (key-sorted, compact) JSON of the full payload.
inline CallCacheKey cache_key(const orchestration::ChatRequest& request) {
  return {hash::sha256_hex(json(request).dump())};
}

inline CallCacheKey embedding_cache_key(const std::string& model, const std::string& text) {
  return {hash::sha256_hex(json{{"model", model}, {"input", text}}.dump())};
}

// Content hash of any configuration fragment; used to version store entries.
inline std::string config_hash(const json& config) { return hash::sha256_hex(config.dump()); }

}  // namespace ensconf::ingestion
