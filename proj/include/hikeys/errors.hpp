#pragma once

#include <stdexcept>
#include <string>

namespace hikeys {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A protocol rule was broken (duplicate contributor, bad initiator, ...).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Unwrap attempted with a private key that does not match the recipient.
class DecryptionDenied : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Group ciphertext opened with a key of the right scope but another epoch.
class StaleKeyError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

/// Group ciphertext opened with a key of a different kind, scope or value.
class WrongKeyError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class ScenarioError : public Error {
 public:
  using Error::Error;
};

class RoutingError : public Error {
 public:
  using Error::Error;
};

}  // namespace hikeys
