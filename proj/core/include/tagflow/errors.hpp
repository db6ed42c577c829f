// errors.hpp - Exception types thrown by tagflow.

#pragma once

#include <stdexcept>
#include <string>

namespace tagflow {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class GeometryMismatch : public Error {
  public:
    using Error::Error;
};

// Invalid configuration value; field() is the dotted key path, e.g. "phantom.tag_wavelength".
class ConfigError : public Error {
  public:
    ConfigError(std::string field, const std::string &message)
        : Error(field + ": " + message), field_(std::move(field)) {}

    const std::string &field() const { return field_; }

  private:
    std::string field_;
};

// A loss term evaluated to NaN or infinity during optimization.
class NonFiniteLoss : public Error {
  public:
    NonFiniteLoss(std::string term, int iteration)
        : Error("non-finite " + term + " loss at iteration " + std::to_string(iteration)), term_(std::move(term)),
          iteration_(iteration) {}

    const std::string &term() const { return term_; }
    int iteration() const { return iteration_; }

  private:
    std::string term_;
    int iteration_;
};

} // namespace tagflow
