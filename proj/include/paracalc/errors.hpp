#pragma once

#include <stdexcept>
#include <string>

namespace paracalc {

/// Failure categories; the CLI maps them onto exit codes.
enum class ErrorKind {
    configuration,
    domain,
    degenerate_input,
    unsupported,
    incomplete,
    numerical,
    io,
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what)
{
    if (!cond) fail(kind, what);
}

/// 0 success, 2 validation, 3 numerical failure, 4 I/O.
inline int exit_code_for(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::io: return 4;
    case ErrorKind::numerical:
    case ErrorKind::internal: return 3;
    default: return 2;
    }
}

}  // namespace paracalc
