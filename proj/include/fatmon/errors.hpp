#pragma once

#include <stdexcept>
#include <string>

namespace fatmon {

// Error taxonomy; the CLI maps kinds to process exit codes.
enum class ErrorKind {
    Validation = 2,  // malformed input, violated precondition, bad configuration
    Io = 3,          // missing or unreadable files
    Numeric = 4,     // degenerate or unstable numerical situation
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_validation(const std::string& msg) {
    throw Error(ErrorKind::Validation, msg);
}

[[noreturn]] inline void throw_io(const std::string& msg) {
    throw Error(ErrorKind::Io, msg);
}

[[noreturn]] inline void throw_numeric(const std::string& msg) {
    throw Error(ErrorKind::Numeric, msg);
}

}  // namespace fatmon
