// This file is part of the dmn toolkit, a deep material network library
// for concurrent multiscale simulation of fiber reinforced composites.
//
// SPDX-License-Identifier: MIT

#pragma once

#include <stdexcept>
#include <string>

namespace dmn {

/// Failure category. The numeric value doubles as the process exit code,
/// so the categories stay distinguishable from shell scripts.
enum class ErrorCode : int {
  config = 2,  ///< invalid configuration or parameters
  data = 3,    ///< malformed or inadmissible input data
  solver = 4,  ///< numerical failure (non-convergence, singularity)
  io = 5,      ///< file system / stream failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(code_); }

  static Error config(const std::string& what) { return {ErrorCode::config, what}; }
  static Error data(const std::string& what) { return {ErrorCode::data, what}; }
  static Error solver(const std::string& what) { return {ErrorCode::solver, what}; }
  static Error io(const std::string& what) { return {ErrorCode::io, what}; }

 private:
  ErrorCode code_;
};

}  // namespace dmn
