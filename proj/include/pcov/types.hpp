#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows are subjects, columns are the stacked voxel coordinates.
using ObservationMatrix = Matrix;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class LoadError : public Error {
public:
    using Error::Error;
};

class InternalError : public Error {
public:
    using Error::Error;
};

// Raised when a long-run variance falls to or below the variance floor.
// `index` is the offending statistic component; `block` is -1 unless the
// estimate came from one block of the distributed engine.
class DegenerateVarianceError : public Error {
public:
    DegenerateVarianceError(const std::string& what, std::ptrdiff_t index, std::ptrdiff_t block = -1)
        : Error(what), index_(index), block_(block) {}

    std::ptrdiff_t index() const noexcept { return index_; }
    std::ptrdiff_t block() const noexcept { return block_; }

private:
    std::ptrdiff_t index_;
    std::ptrdiff_t block_;
};

inline constexpr double kVarianceFloor = 1e-12;

}  // namespace pcov
