#pragma once

#include <stdexcept>
#include <string>

namespace simip {

enum class ErrorKind {
    InvalidArgument,
    InvalidScene,
    UnknownId,
    AmbiguousOrder,
    PreconditionFailed,
    OutOfBounds,
    MissingPose,
    Infeasible,
    Io,
    Refused,
    ValidationFailed,
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::InvalidScene: return "invalid scene";
        case ErrorKind::UnknownId: return "unknown id";
        case ErrorKind::AmbiguousOrder: return "ambiguous order";
        case ErrorKind::PreconditionFailed: return "precondition failed";
        case ErrorKind::OutOfBounds: return "out of bounds";
        case ErrorKind::MissingPose: return "missing pose";
        case ErrorKind::Infeasible: return "infeasible";
        case ErrorKind::Io: return "i/o";
        case ErrorKind::Refused: return "refused";
        case ErrorKind::ValidationFailed: return "validation failed";
    }
    return "error";
}

}  // namespace simip
