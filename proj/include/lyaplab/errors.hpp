#ifndef LYAPLAB_ERRORS_HPP
#define LYAPLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lyaplab {

// Error categories map onto CLI exit codes: validation -> 2,
// numerical -> 3, io -> 4.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SizeError : ValidationError {
  explicit SizeError(const std::string& msg) : ValidationError(msg) {}
};

}  // namespace lyaplab

#endif
