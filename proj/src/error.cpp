#include "birnn/error.hpp"

namespace birnn {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidParams: return "invalid-params";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::DegenerateData: return "degenerate-data";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::UnsatisfiableSchedule: return "unsatisfiable-schedule";
    case ErrorKind::UnstableConfiguration: return "unstable-configuration";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::NonFiniteGradient: return "non-finite-gradient";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::PatientCountMismatch: return "patient-count-mismatch";
    case ErrorKind::ProvenanceMismatch: return "provenance-mismatch";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

} // namespace birnn
