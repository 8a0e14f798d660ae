#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace drmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when a numerical procedure (factorization, PSD repair, NLP solve)
/// fails beyond its recovery tolerances. Carries a diagnostic message.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace drmpc
