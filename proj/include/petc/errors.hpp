#pragma once

#include <stdexcept>
#include <string>

namespace petc {

// Thrown when a scenario file or parameter set is malformed or inconsistent.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a design has no valid output for the requested parameters
// (uncontrollable pair, disconnected graph, no finite trigger offset, ...).
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a numeric routine fails to meet its own contract
// (iteration cap hit, non-finite intermediate, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by the simulator when a state norm crosses the divergence guard.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace petc
