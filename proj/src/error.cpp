#include "fapd/error.hpp"

namespace fapd {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::InsufficientSamples: return "insufficient-samples";
        case ErrorKind::ConvergenceFailure: return "convergence-failure";
        case ErrorKind::PartitionFailure: return "partition-failure";
        case ErrorKind::DegenerateSimilarity: return "degenerate-similarity";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Format: return "format";
        case ErrorKind::Io: return "io";
        case ErrorKind::Config: return "config";
    }
    return "unknown";
}

}  // namespace fapd
