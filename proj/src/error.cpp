#include "wmark/error.hpp"

namespace wmark {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::TextTooShort: return "TextTooShort";
    case ErrorKind::EmptyScoreSet: return "EmptyScoreSet";
    case ErrorKind::DegenerateBounds: return "DegenerateBounds";
    case ErrorKind::NonpositiveBaseline: return "NonpositiveBaseline";
    case ErrorKind::InvalidWeights: return "InvalidWeights";
    case ErrorKind::MissingMetric: return "MissingMetric";
    case ErrorKind::MissingSidecar: return "MissingSidecar";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace wmark
