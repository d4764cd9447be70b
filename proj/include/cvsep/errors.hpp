#ifndef CVSEP_ERRORS_HPP
#define CVSEP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cvsep {

// Invalid arguments are reported with std::invalid_argument throughout.

/// Malformed input data (files, matrices, sample tables).
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine failed to converge or hit a degenerate case.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sample sequence with zero variance where a standardized moment was requested.
class degenerate_variance : public numerical_error {
 public:
  using numerical_error::numerical_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace detail
}  // namespace cvsep

#endif  // CVSEP_ERRORS_HPP
