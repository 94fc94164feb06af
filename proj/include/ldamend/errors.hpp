#pragma once

#include <stdexcept>
#include <string>

namespace ldamend {

// Every error raised by the library derives from Error so callers can map
// the whole family onto exit codes in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class MissingWordError : public Error {
 public:
  explicit MissingWordError(const std::string& word)
      : Error("required word not found in embedding file: " + word), word_(word) {}
  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

class EmptyClassError : public Error {
 public:
  explicit EmptyClassError(int label)
      : Error("class " + std::to_string(label) + " has no members"), label_(label) {}
  int label() const { return label_; }

 private:
  int label_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ldamend
