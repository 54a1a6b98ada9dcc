#pragma once

#include <stdexcept>
#include <string>

namespace evalxai {

// Root of all library errors. The CLI maps ConfigError to exit code 1 and
// DataError to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

} // namespace evalxai
