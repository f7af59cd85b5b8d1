#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vsum {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixF = Eigen::MatrixXf;
using VectorF = Eigen::VectorXf;
// Binary masks over frames (values are 0/1).
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskVector = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed files, bad magic, truncated payloads.
struct FormatError : Error {
  using Error::Error;
};

// Data that parses but breaks a documented invariant.
struct ValidationError : Error {
  using Error::Error;
};

// Bad configuration values or unknown keys.
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ShapeError : Error {
  using Error::Error;
};

}  // namespace vsum
