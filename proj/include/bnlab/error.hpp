#pragma once

#include <stdexcept>
#include <string>

namespace bnlab {

// Every failure the library raises derives from Error so callers can catch the
// whole family at once; the subclasses name the failure category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ValueError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class SizeError : public Error {
public:
    using Error::Error;
};

class LabelError : public Error {
public:
    using Error::Error;
};

// Batch normalization needs at least two activations per channel.
class DegenerateBatchError : public Error {
public:
    using Error::Error;
};

class UninitializedStatsError : public Error {
public:
    using Error::Error;
};

class CacheMismatchError : public Error {
public:
    using Error::Error;
};

class GroupingError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public ConfigError {
public:
    ParseError(std::size_t line, const std::string& key, const std::string& what)
        : ConfigError("line " + std::to_string(line) + ", key '" + key + "': " + what),
          line_(line), key_(key) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    std::size_t line_;
    std::string key_;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class RunError : public Error {
public:
    using Error::Error;
};

}  // namespace bnlab
