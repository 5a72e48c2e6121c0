#pragma once

#include <stdexcept>
#include <string>

namespace miaudit {

// Error taxonomy mirrored by the C API status codes and the CLI exit codes:
// config = 1, data = 2, numeric = 3.
class Error : public std::runtime_error {
public:
    enum class Kind { Config = 1, Data = 2, Numeric = 3 };

    Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(Kind::Config, msg) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(Kind::Data, msg) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(Kind::Numeric, msg) {}
};

}  // namespace miaudit
