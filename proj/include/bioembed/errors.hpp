#pragma once

#include <stdexcept>
#include <string>

namespace bioembed {

// Exit codes shared by every CLI subcommand.
enum class ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual ExitCode exit_code() const { return ExitCode::kData; }
};

class UsageError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const override { return ExitCode::kUsage; }
};

// Malformed input files (manifest, WAV, config, containers).
class ParseError : public Error {
public:
    using Error::Error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A metric or protocol that is undefined for the given input.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const override { return ExitCode::kNumeric; }
};

}  // namespace bioembed
