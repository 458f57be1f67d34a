#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace kbfix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; line is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

class CycleError : public Error {
 public:
  explicit CycleError(std::string member)
      : Error("rdfs:subClassOf cycle through class '" + member + "'"), member_(std::move(member)) {}

  const std::string& member() const noexcept { return member_; }

 private:
  std::string member_;
};

// A referenced entity, property or vector is missing.
class UnknownTermError : public Error {
 public:
  UnknownTermError(const std::string& kind, std::string term)
      : Error("unknown " + kind + " '" + term + "'"), term_(std::move(term)) {}

  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace kbfix
