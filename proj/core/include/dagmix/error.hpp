#pragma once

#include <stdexcept>
#include <string>

namespace dagmix {

// Base of everything the library throws. `kind()` is a stable machine-readable
// tag used by the CLI error record.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Malformed model document (syntax) or a model that breaks a structural rule
// (semantic). The message names the offending node when there is one.
class ModelError : public Error {
 public:
  enum class Category { syntax, semantic };
  ModelError(Category c, const std::string& what)
      : Error(c == Category::syntax ? "model_syntax" : "model_semantic", what),
        category_(c) {}
  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

// Data incompatible with the model (bad codes, missing columns, bad weights).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("data", what) {}
};

// Invalid queries, dimension mismatches and other argument errors.
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("argument", what) {}
};

// Zero-probability cells, singular information, invalid cumulative logits,
// M-step divergence.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error("numerical", what) {}
};

}  // namespace dagmix
