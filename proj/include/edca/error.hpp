#pragma once

#include <stdexcept>
#include <string>

namespace edca {

// Invalid or inconsistent scenario input. `path` names the offending field
// (e.g. "acs[1].cw_min") when one can be identified.
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

// A numerical fixed point did not settle within its iteration budget.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

private:
  int iterations_;
  double residual_;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed line in an event stream or trace file; carries the 1-based line.
class ParseError : public std::runtime_error {
public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const noexcept { return line_; }

private:
  int line_;
};

}  // namespace edca
