// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <string>

#include "dmn/error.hpp"

namespace dmn {

/// Runs fn(k) for k in [0, n) with optional OpenMP workers, capturing the
/// first exception instead of letting it cross the parallel region.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  bool failed = false;
  ErrorCode code = ErrorCode::solver;
  std::string message;
#pragma omp parallel for schedule(static) num_threads(threads) \
    if (threads > 1)
  for (int k = 0; k < n; ++k) {
    try {
      fn(k);
    } catch (const Error& e) {
#pragma omp critical
      if (!failed) {
        failed = true;
        code = e.code();
        message = e.what();
      }
    } catch (const std::exception& e) {
#pragma omp critical
      if (!failed) {
        failed = true;
        message = e.what();
      }
    }
  }
  if (failed) throw Error(code, message);
}

}  // namespace dmn
