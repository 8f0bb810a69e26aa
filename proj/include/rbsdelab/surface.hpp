#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbsdelab {

/// Error raised when an instance or argument violates a contract.
class InvalidInstanceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Error raised when an iteration fails to converge; carries the worst residual seen.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, double worst_residual)
        : std::runtime_error(what), worst_residual(worst_residual) {}
    double worst_residual;
};

/// Dense (time x node) value surface. Row i holds values at grid time t_i.
class Surface {
public:
    Surface() = default;
    Surface(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

    double& at(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double at(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

    std::span<double> row(int i) { return {data_.data() + static_cast<size_t>(i) * cols_, static_cast<size_t>(cols_)}; }
    std::span<const double> row(int i) const {
        return {data_.data() + static_cast<size_t>(i) * cols_, static_cast<size_t>(cols_)};
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    bool operator==(const Surface& other) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

}  // namespace rbsdelab
