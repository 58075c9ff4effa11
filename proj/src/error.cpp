#include "ipe/error.hpp"

namespace ipe {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Dimension: return "dimension";
        case ErrorCode::Precondition: return "precondition";
        case ErrorCode::DegenerateEvidence: return "degenerate_evidence";
        case ErrorCode::Domain: return "domain";
        case ErrorCode::RankDeficient: return "rank_deficient";
        case ErrorCode::WeakFirstStage: return "weak_first_stage";
        case ErrorCode::DegenerateWeights: return "degenerate_weights";
        case ErrorCode::Validation: return "validation";
        case ErrorCode::Schema: return "schema";
        case ErrorCode::Io: return "io";
    }
    return "unknown";
}

// 1 is reserved for usage errors reported by the argument parser.
int exit_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::Dimension: return 10;
        case ErrorCode::Precondition: return 11;
        case ErrorCode::DegenerateEvidence: return 12;
        case ErrorCode::Domain: return 13;
        case ErrorCode::RankDeficient: return 14;
        case ErrorCode::WeakFirstStage: return 15;
        case ErrorCode::DegenerateWeights: return 16;
        case ErrorCode::Validation: return 17;
        case ErrorCode::Schema: return 18;
        case ErrorCode::Io: return 19;
    }
    return 2;
}

}  // namespace ipe
