#ifndef RCM_ERROR_HPP
#define RCM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace rcm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters or violated preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// An iterative solve stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace rcm

#endif  // RCM_ERROR_HPP
