#pragma once

#include <stdexcept>
#include <string>

namespace brokerage {

// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed experiment setup: dimension mismatches, bad config values,
// feedback kinds that do not match the policy.
class ConfigError : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class FeedbackMismatch : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class UnsupportedCombination : public Error {
public:
    using Error::Error;
};

class InvalidInstance : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace brokerage
