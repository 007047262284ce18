// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

#include <stdexcept>
#include <string>

namespace tagmetric {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class OovError : public Error {
 public:
  explicit OovError(const std::string& tag)
      : Error("out-of-vocabulary tag: '" + tag + "'"), tag_(tag) {}

  const std::string& tag() const noexcept { return tag_; }

 private:
  std::string tag_;
};

class BindingError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tagmetric
