#ifndef RSGNN_ERRORS_HPP
#define RSGNN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rsgnn {

// Contract violations by the caller (bad dimensions, out-of-range flags) are
// reported as std::invalid_argument. The two types below cover the rest.

/// Malformed or inconsistent input data (files, graphs, annotations).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values during training or evaluation.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rsgnn

#endif  // RSGNN_ERRORS_HPP
