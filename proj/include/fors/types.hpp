#pragma once

#include <functional>

#include <Eigen/Core>

namespace fors {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// First-order oracle: x -> grad f(x) (or a score s_t(x)).
using VectorField = std::function<Vector(const Vector&)>;

}  // namespace fors
