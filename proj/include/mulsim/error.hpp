#pragma once

#include <stdexcept>
#include <string>

namespace mulsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class CodecError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

[[noreturn]] inline void throw_shape(const char* op, int ar, int ac, int br, int bc) {
  throw ShapeError(std::string(op) + ": incompatible shapes (" + std::to_string(ar) + "x" +
                   std::to_string(ac) + ") vs (" + std::to_string(br) + "x" + std::to_string(bc) +
                   ")");
}

[[noreturn]] inline void throw_shape(const char* op, int ar, int ac) {
  throw ShapeError(std::string(op) + ": bad shape (" + std::to_string(ar) + "x" +
                   std::to_string(ac) + ")");
}

}  // namespace mulsim
