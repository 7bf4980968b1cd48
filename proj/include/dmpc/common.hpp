#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace dmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error categories map to CLI exit codes: config=2, io=3, numeric=4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

inline void require_finite(const Vec& v, const std::string& what) {
    if (!v.allFinite()) throw NumericError(what + ": non-finite values");
}

inline void require_finite(const Mat& m, const std::string& what) {
    if (!m.allFinite()) throw NumericError(what + ": non-finite values");
}

}  // namespace dmpc
