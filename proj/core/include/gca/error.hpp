#pragma once

#include <stdexcept>
#include <string>

namespace gca {

enum class Errc {
  io,
  parse,
  non_finite,
  bad_magic,
  truncated,
  zero_row,
  dimension_mismatch,
  invalid_argument,
  non_positive,
  overflow,
  support_violation,
  empty_class,
  stale_cache,
  degenerate_split,
  non_finite_loss,
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gca
