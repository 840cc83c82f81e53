#pragma once

#include <stdexcept>
#include <string>

namespace ensconf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every agent answer failed to parse; the record cannot be voted on.
class AbstainError : public Error {
 public:
  using Error::Error;
};

// Endpoint rejected the request in a way retrying cannot fix (auth, bad route, bad body).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Network-level failure or retryable server status.
class TransientError : public Error {
 public:
  using Error::Error;
};

}  // namespace ensconf
