#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slotwise {

enum class ErrorCode {
    Schema,
    Config,
    InvalidArgument,
    NotFound,
    MissingQuery,
    BackendUnavailable,
    ProtocolError,
    UnsupportedModality,
    DuplicateDocument,
    WebSearchUnavailable,
    SessionWriteError,
    IntentUnparseable,
    ClassificationFailed,
    EmptyReference,
    EmptyOperand,
    EmbedderError,
    VerdictOutOfRange,
    VerdictUnparseable,
    EmptyEvaluation,
    IngestError,
    SynthesisError,
};

std::string_view to_string(ErrorCode code);

// Base of every error the library throws. The code is what callers branch on;
// the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class BackendUnavailable : public Error {
public:
    BackendUnavailable(const std::string& message, int attempts)
        : Error(ErrorCode::BackendUnavailable, message), attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

// Parse failures that can be pinned to a line of the offending document.
class LocatedError : public Error {
public:
    LocatedError(ErrorCode code, const std::string& message, std::size_t line)
        : Error(code, "line " + std::to_string(line) + ": " + message), line_(line), detail_(message) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

}  // namespace slotwise
