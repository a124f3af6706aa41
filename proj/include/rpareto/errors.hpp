#ifndef RPARETO_ERRORS_HPP
#define RPARETO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rpareto {

// Bad configuration or bad arguments (CLI exit code 1).
struct usage_error : std::runtime_error {
  explicit usage_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: singular matrices, failed embeddings, log of zero
// (CLI exit code 2).
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rpareto

#endif
