#pragma once

#include <stdexcept>
#include <string>

#include "rfl/linalg.hpp"

namespace rfl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, std::size_t node)
      : Error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

/// Raised when a field is evaluated on its jump set. Carries both one-sided
/// traces; `plus` is the trace on the side the jump normal points into.
class OnJumpError : public Error {
 public:
  OnJumpError(const std::string& what, Vec minus, Vec plus, int component)
      : Error(what), minus_(std::move(minus)), plus_(std::move(plus)),
        component_(component) {}
  const Vec& minus() const { return minus_; }
  const Vec& plus() const { return plus_; }
  int component() const { return component_; }

 private:
  Vec minus_, plus_;
  int component_;
};

class NoJumpError : public Error {
 public:
  using Error::Error;
};

class NonTransversalCrossing : public Error {
 public:
  using Error::Error;
};

class RunawayError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace rfl
