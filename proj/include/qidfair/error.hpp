#ifndef QIDFAIR_ERROR_HPP
#define QIDFAIR_ERROR_HPP

#include <stdexcept>
#include <string>

namespace qidfair {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix dimensions that do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value outside its attribute's declared domain.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// Intervention whose accuracy cost exceeds the admissible tolerance.
class InadmissibleIntervention : public Error {
 public:
  using Error::Error;
};

}  // namespace qidfair

#endif  // QIDFAIR_ERROR_HPP
