#pragma once

#include <stdexcept>
#include <string>

namespace trojkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when an experiment config file is missing or invalid (CLI exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Thrown by the pipeline with the name of the stage that failed (CLI exit 3).
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

[[noreturn]] inline void fail(const std::string& message) { throw Error(message); }

}  // namespace trojkit
