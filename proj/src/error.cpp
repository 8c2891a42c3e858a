#include "hiclr/error.hpp"

namespace hiclr {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config error";
        case ErrorKind::parse: return "parse error";
        case ErrorKind::io: return "io error";
        case ErrorKind::shape: return "shape error";
        case ErrorKind::empty_input: return "empty input";
        case ErrorKind::internal: return "internal error";
    }
    return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace hiclr
