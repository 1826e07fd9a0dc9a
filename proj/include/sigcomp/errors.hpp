#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sigcomp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension disagreement between operands.
struct ShapeError : Error {
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

// NaN/Inf encountered where finite values are required.
struct NumericsError : Error {
  using Error::Error;
};

// Malformed or inconsistent external data (embedding files, protocol files).
struct IngestError : Error {
  using Error::Error;
};

// Bad experiment configuration (file, flags, or field values).
struct ConfigError : Error {
  using Error::Error;
};

// Pre-training failed to reach the accuracy threshold within the epoch
// budget. Carries the loss trace so the caller can diagnose the run.
struct PretrainTimeout : Error {
  PretrainTimeout(const std::string& what, std::vector<double> trace,
                  double color_acc, double shape_acc)
      : Error(what),
        loss_trace(std::move(trace)),
        final_color_acc(color_acc),
        final_shape_acc(shape_acc) {}

  std::vector<double> loss_trace;
  double final_color_acc = 0.0;
  double final_shape_acc = 0.0;
};

}  // namespace sigcomp
