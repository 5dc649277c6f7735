#pragma once

#include <stdexcept>
#include <string>

namespace phycine {

// Error taxonomy shared by all modules. The CLI maps kinds onto exit codes
// (usage=1, data=2, numeric=3, invariant=4).
enum class ErrorKind {
    Usage,
    Data,
    Numeric,
    Invariant,
    Shape,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Usage: return 1;
        case ErrorKind::Data: return 2;
        case ErrorKind::Shape: return 2;
        case ErrorKind::Numeric: return 3;
        case ErrorKind::Invariant: return 4;
    }
    return 1;
}

}  // namespace phycine
