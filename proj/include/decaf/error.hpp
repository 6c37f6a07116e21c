#pragma once

#include <stdexcept>
#include <string>

namespace decaf {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration, unknown plant/requirement, schema mismatch.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Arguments that violate an operation's precondition (bad index, wrong dimension, ...).
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Formula text that does not conform to the grammar.
class ParseError : public Error {
  public:
    ParseError(const std::string &message, std::size_t position)
        : Error(message + " at position " + std::to_string(position)), position_(position) {}

    [[nodiscard]] std::size_t position() const { return position_; }

  private:
    std::size_t position_;
};

/// Robustness requested on a trace that does not cover the formula horizon,
/// or that lacks a referenced channel.
class TraceError : public Error {
  public:
    using Error::Error;
};

/// A plant state became non-finite during simulation.
class SimulationDivergence : public Error {
  public:
    SimulationDivergence(const std::string &plant, double time)
        : Error("simulation of '" + plant + "' diverged at t=" + std::to_string(time)),
          time_(time) {}

    [[nodiscard]] double time() const { return time_; }

  private:
    double time_;
};

/// Nothing to explain: a training set with no failing rows.
class NothingToExplain : public Error {
  public:
    using Error::Error;
};

} // namespace decaf
