#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace compot {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Error taxonomy mirrored by the CLI exit codes: config/input problems,
// numerical failures, and unreachable compression budgets.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

struct BudgetError : Error {
    using Error::Error;
};

// Storage orientation of a weight tensor. Compute convention is always
// "activations times weight" with the matrix as rows-in, columns-out;
// checkpoints frequently store the transpose.
enum class Orientation {
    InputByOutput,   // stored m x n, used as-is
    OutputByInput,   // stored n x m, transposed on load
};

// A named dense weight matrix, already normalized to compute orientation.
struct WeightMatrix {
    std::string name;
    MatrixXd data;   // m x n

    Eigen::Index rows() const { return data.rows(); }
    Eigen::Index cols() const { return data.cols(); }
};

inline Orientation orientation_from_string(const std::string& s) {
    if (s == "input-by-output") return Orientation::InputByOutput;
    if (s == "output-by-input") return Orientation::OutputByInput;
    throw ConfigError("unknown orientation: " + s);
}

inline std::string to_string(Orientation o) {
    return o == Orientation::InputByOutput ? "input-by-output" : "output-by-input";
}

}  // namespace compot
