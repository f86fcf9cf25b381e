// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gencomp {

// Base of every error this library throws. Callers that only care about
// "user supplied something bad" vs "we broke" can use IsUserError().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class EmptyVideo : public InvalidInput {
 public:
  EmptyVideo() : InvalidInput("empty video") {}
  using InvalidInput::InvalidInput;
};

class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// A scene that cannot be rendered as requested (e.g. sprite leaves a clean
// scene).
class SpecViolation : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class NothingToInsert : public InvalidInput {
 public:
  NothingToInsert() : InvalidInput("retargeted mask is empty in every frame") {}
  explicit NothingToInsert(const std::string& what) : InvalidInput(what) {}
};

// Internal wiring contract broken, e.g. fusion over overlapping position
// labels when the model expects extended ones.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Training produced NaN/Inf.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline bool IsUserError(const std::exception& e) {
  return dynamic_cast<const InvalidInput*>(&e) != nullptr ||
         dynamic_cast<const IoError*>(&e) != nullptr;
}

}  // namespace gencomp
