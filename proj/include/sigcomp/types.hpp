#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace sigcomp {

// All numerics run in double precision; the nets are tiny and determinism
// matters more than speed.
using Scalar = double;

template <typename S>
using VectorT = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = VectorT<Scalar>;
using Matrix = MatrixT<Scalar>;
using Index = Eigen::Index;

}  // namespace sigcomp
