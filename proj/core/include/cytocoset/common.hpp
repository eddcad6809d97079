#ifndef CYTOCOSET_COMMON_HPP
#define CYTOCOSET_COMMON_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cytocoset {

/// Dense row-major matrix; rows are cells (or samples), columns are features.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/**
 * Malformed or inconsistent input data: unreadable files, bad CSV cells,
 * missing covariates, violated preconditions on a cohort.
 */
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Non-finite values produced during a numeric computation (e.g. an exploding loss).
 */
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}

#endif
