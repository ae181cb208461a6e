#pragma once

#include <stdexcept>
#include <string>

namespace unweaver {

enum class ErrorCode {
    kInvalidArgument,
    kEmptyDocument,
    kBackend,
    kMalformedOutput,
    kDimensionMismatch,
    kChunkIdOutOfRange,
    kIndexEmpty,
    kIo,
    kSchemaVersionMismatch,
    kSingularSystem,
};

const char* to_string(ErrorCode code) noexcept;

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

template <ErrorCode Code>
class CodedError : public Error {
public:
    explicit CodedError(const std::string& message) : Error(Code, message) {}
};

using InvalidArgument = CodedError<ErrorCode::kInvalidArgument>;
using EmptyDocument = CodedError<ErrorCode::kEmptyDocument>;
using MalformedOutput = CodedError<ErrorCode::kMalformedOutput>;
using DimensionMismatch = CodedError<ErrorCode::kDimensionMismatch>;
using ChunkIdOutOfRange = CodedError<ErrorCode::kChunkIdOutOfRange>;
using IndexEmpty = CodedError<ErrorCode::kIndexEmpty>;
using IoError = CodedError<ErrorCode::kIo>;
using SchemaVersionMismatch = CodedError<ErrorCode::kSchemaVersionMismatch>;
using SingularSystem = CodedError<ErrorCode::kSingularSystem>;

/// Transport or provider failure. `status` is the last HTTP status seen, or 0
/// when no response was received at all.
class BackendError : public Error {
public:
    BackendError(const std::string& message, int status = 0)
        : Error(ErrorCode::kBackend, message), status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

}  // namespace unweaver
