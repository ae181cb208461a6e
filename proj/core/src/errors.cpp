#include "unweaver/errors.hpp"

namespace unweaver {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kInvalidArgument: return "InvalidArgument";
        case ErrorCode::kEmptyDocument: return "EmptyDocument";
        case ErrorCode::kBackend: return "BackendError";
        case ErrorCode::kMalformedOutput: return "MalformedOutput";
        case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
        case ErrorCode::kChunkIdOutOfRange: return "ChunkIdOutOfRange";
        case ErrorCode::kIndexEmpty: return "IndexEmpty";
        case ErrorCode::kIo: return "IoError";
        case ErrorCode::kSchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorCode::kSingularSystem: return "SingularSystem";
    }
    return "Unknown";
}

}  // namespace unweaver
