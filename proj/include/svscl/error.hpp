#pragma once

#include <stdexcept>
#include <string>

namespace svscl {

// Base of every error raised by the library. The CLI renders what() as a
// single-line diagnostic.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class AllLinearTermsZero : public Error {
 public:
  AllLinearTermsZero() : Error("flux has no nonzero coefficient of degree >= 1") {}
};

class WindowOverflow : public Error {
 public:
  using Error::Error;
};

class GridTooSmall : public Error {
 public:
  using Error::Error;
};

class Blowup : public Error {
 public:
  Blowup(const std::string& what, double time, double norm)
      : Error(what), time_(time), norm_(norm) {}
  double time() const { return time_; }
  double norm() const { return norm_; }

 private:
  double time_;
  double norm_;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class CapExceeded : public Error {
 public:
  using Error::Error;
};

class SolveFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace svscl
