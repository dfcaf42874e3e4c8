#pragma once

#include <string>

#include <Eigen/Core>

#include "zic/core.hpp"

namespace zic::nn {

/// Batch-major matrix: one row per sample, one column per feature.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor with its gradient accumulator.
struct Param {
  Tensor2 value;
  Tensor2 grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

inline void require_shape(const Tensor2& t, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if ((rows >= 0 && t.rows() != rows) || (cols >= 0 && t.cols() != cols)) {
    throw ShapeError(std::string(what) + ": got " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                     ", expected " + (rows >= 0 ? std::to_string(rows) : std::string("*")) + "x" +
                     (cols >= 0 ? std::to_string(cols) : std::string("*")));
  }
}

inline bool all_finite(const Tensor2& t) { return t.allFinite(); }

}  // namespace zic::nn
