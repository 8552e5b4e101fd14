#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace asd {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor or matrix shapes that do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A NaN/Inf produced or consumed where finite values are required.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values (MelConfig, LossConfig, TrainConfig, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed binary input; carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Manifest CSV problems; carries the 1-based line number (0 when not line-specific).
class ManifestError : public Error {
public:
    ManifestError(const std::string& what, std::size_t line)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A (machine_type, machine_id) pair missing from a class map.
class ClassMapError : public Error {
public:
    using Error::Error;
};

}  // namespace asd
