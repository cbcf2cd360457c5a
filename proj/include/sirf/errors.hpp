#pragma once

#include <stdexcept>
#include <string>

namespace sirf {

/// Malformed or out-of-domain input data (CLI exit code 2).
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values, failed factorizations and stuck samplers (CLI exit code 3).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A ModelState that violates one of its structural invariants.
class InvariantError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

} // namespace sirf
