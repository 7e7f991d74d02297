#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vqforge {

/// Root of every error the toolchain raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// A caller violated a documented precondition (bad config, malformed input).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// The subject-language source does not parse. Line is 1-based, column is a
/// 1-based byte column.
class SyntaxError : public Error {
public:
    SyntaxError(std::string reason, std::size_t line, std::size_t column)
        : Error(reason + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          reason_(std::move(reason)), line_(line), column_(column) {}

    const std::string& reason() const noexcept { return reason_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string reason_;
    std::size_t line_;
    std::size_t column_;
};

// vq-engine
class TemplateFormatError : public Error {
public:
    using Error::Error;
};
class EmptyTargets : public Error {
public:
    using Error::Error;
};
class KindMismatch : public Error {
public:
    using Error::Error;
};
class UnknownVariant : public Error {
public:
    using Error::Error;
};

// prompting
class EmptyChain : public Error {
public:
    using Error::Error;
};
class NoCodeFound : public Error {
public:
    using Error::Error;
};

// llm-gateway
class BackendError : public Error {
public:
    using Error::Error;
};
class BackendUnavailable : public BackendError {
public:
    using BackendError::BackendError;
};
class RateLimited : public BackendError {
public:
    using BackendError::BackendError;
};
class MalformedResponse : public BackendError {
public:
    using BackendError::BackendError;
};
class ReplayMiss : public BackendError {
public:
    explicit ReplayMiss(std::string digest)
        : BackendError("no recorded response for request " + digest), digest_(std::move(digest)) {}
    const std::string& digest() const noexcept { return digest_; }

private:
    std::string digest_;
};
class CorruptStore : public Error {
public:
    using Error::Error;
};

// evalharness
class MarkerMissing : public Error {
public:
    using Error::Error;
};
class SandboxSpawnFailure : public Error {
public:
    using Error::Error;
};
class RunMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace vqforge
