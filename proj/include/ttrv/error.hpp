#pragma once

#include <stdexcept>
#include <string>

namespace ttrv {

enum class Errc {
  invalid_argument,
  parse,
  io,
  divergence,
  network,
};

// Every failure raised by the core carries one of the codes above; the C API
// maps them one-to-one onto ttrv_status values.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace ttrv
