#ifndef PDAT_CORE_COMMON_HPP
#define PDAT_CORE_COMMON_HPP

#include <iostream>
#include <stdexcept>
#include <string>

namespace pdat {

// Error taxonomy maps onto CLI exit codes: config 2, data 3, numeric 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void warn(const std::string& msg) { std::cerr << "[warn] " << msg << "\n"; }
inline void info(const std::string& msg) { std::cerr << "[info] " << msg << "\n"; }

}  // namespace pdat

#endif
