#pragma once

#include <stdexcept>
#include <string>

namespace ovl {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ZeroVelocity : Error {
  explicit ZeroVelocity(const std::string& msg) : Error(msg) {}
};

struct QuadratureFailure : Error {
  explicit QuadratureFailure(const std::string& msg) : Error(msg) {}
};

struct NotApplicable : Error {
  explicit NotApplicable(const std::string& msg) : Error(msg) {}
};

struct StepSizeFailure : Error {
  explicit StepSizeFailure(const std::string& msg) : Error(msg) {}
};

struct GridTooCoarse : Error {
  explicit GridTooCoarse(const std::string& msg) : Error(msg) {}
};

struct TimeNotSampled : Error {
  explicit TimeNotSampled(const std::string& msg) : Error(msg) {}
};

struct SparseHistogram : Error {
  explicit SparseHistogram(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}
