#include "slotwise/error.hpp"

namespace slotwise {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Schema: return "Schema";
        case ErrorCode::Config: return "Config";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::MissingQuery: return "MissingQuery";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::ProtocolError: return "ProtocolError";
        case ErrorCode::UnsupportedModality: return "UnsupportedModality";
        case ErrorCode::DuplicateDocument: return "DuplicateDocument";
        case ErrorCode::WebSearchUnavailable: return "WebSearchUnavailable";
        case ErrorCode::SessionWriteError: return "SessionWriteError";
        case ErrorCode::IntentUnparseable: return "IntentUnparseable";
        case ErrorCode::ClassificationFailed: return "ClassificationFailed";
        case ErrorCode::EmptyReference: return "EmptyReference";
        case ErrorCode::EmptyOperand: return "EmptyOperand";
        case ErrorCode::EmbedderError: return "EmbedderError";
        case ErrorCode::VerdictOutOfRange: return "VerdictOutOfRange";
        case ErrorCode::VerdictUnparseable: return "VerdictUnparseable";
        case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
        case ErrorCode::IngestError: return "IngestError";
        case ErrorCode::SynthesisError: return "SynthesisError";
    }
    return "Unknown";
}

}  // namespace slotwise
