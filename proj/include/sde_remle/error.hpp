#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sde_remle {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something outside an operation's domain. Maps to exit
/// status 1 in the CLI, as do the config and ingestion errors below.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NotFound : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class SimulationDiverged : public Error {
 public:
  SimulationDiverged(std::size_t step, std::uint64_t subject)
      : Error("simulation diverged at step " + std::to_string(step) +
              " (subject " + std::to_string(subject) + ")"),
        step_(step),
        subject_(subject) {}

  std::size_t step() const noexcept { return step_; }
  std::uint64_t subject() const noexcept { return subject_; }

 private:
  std::size_t step_;
  std::uint64_t subject_;
};

class DegenerateDiffusion : public Error {
 public:
  using Error::Error;
};

class MissingPhi : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyEnsemble : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class AllDegenerate : public Error {
 public:
  using Error::Error;
};

class NonFiniteObjective : public Error {
 public:
  using Error::Error;
};

class EmptyExperiment : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ExperimentFailed : public Error {
 public:
  using Error::Error;
};

/// Config problems carry the 1-based line they were found on (0 when the
/// problem is not tied to a line, e.g. a missing key).
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& what, std::size_t line)
      : InvalidArgument(line ? "line " + std::to_string(line) + ": " + what
                             : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnknownKey : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class MissingKey : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class IngestError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace sde_remle
