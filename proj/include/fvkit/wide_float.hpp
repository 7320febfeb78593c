#pragma once

#include <boost/multiprecision/mpfr.hpp>

namespace fvkit {

/// Runtime-precision binary float (MPFR).
using Wide = boost::multiprecision::mpfr_float;

/// Sets the calling thread's default Wide precision for the lifetime of the
/// guard. Only values constructed inside the scope carry the new precision.
class WorkingPrecision {
 public:
  explicit WorkingPrecision(unsigned digits10) : saved_(Wide::default_precision()) {
    Wide::default_precision(digits10);
  }
  ~WorkingPrecision() { Wide::default_precision(saved_); }
  WorkingPrecision(const WorkingPrecision&) = delete;
  WorkingPrecision& operator=(const WorkingPrecision&) = delete;

 private:
  unsigned saved_;
};

}  // namespace fvkit
