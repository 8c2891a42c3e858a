#pragma once

#include <stdexcept>
#include <string>

namespace hiclr {

enum class ErrorKind {
    config,
    parse,
    io,
    shape,
    empty_input,
    internal,
};

const char* to_string(ErrorKind kind);

// All library failures are reported through this type; the CLI maps the
// kind onto its exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

}  // namespace hiclr
