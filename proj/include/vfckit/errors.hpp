#pragma once

#include <stdexcept>
#include <string>

namespace vfckit {

// Stable machine-readable failure codes. Checker operations report failures
// inside a Report instead of throwing; exceptions are reserved for malformed
// inputs and violated preconditions.
enum class ErrCode {
    MALFORMED_MATRIX,
    EMPTY_GROUP,
    POINT_OUTSIDE_DOMAIN,
    NOT_IN_OVERLAP,
    DEGREE_OVERFLOW,
    NON_DIFFERENTIABLE,
    COVER_GAP,
    QUADRATURE_DIVERGED,
    EQUIVARIANCE_FAIL,
    UNVERIFIED_EMBEDDING,
    DOMAIN_TOO_SMALL,
    SINGULAR_NORMAL_DERIVATIVE,
    SHRINK_EXHAUSTED,
    INCOMPATIBLE_CHARTS,
    NOT_PROPER,
    DIM_MISMATCH,
    NOT_TRANSVERSAL,
    EFFECTIVITY_LOST,
    NO_PERMUTATION_FOUND,
    MISSING_EXTENSION_DATA,
    DERIVATIVE_UNAVAILABLE,
    TRANSVERSALITY_RETRY_EXHAUSTED,
    MISSING_POU,
    OMEGA_NOT_NORMALIZED,
    FILTER_INDUCTION_STUCK,
    NEWTON_NONCONVERGENT_SEEDS,
    NOT_VDIM0,
    SIGN_UNDETERMINED,
    BOUNDARY_NOT_TRANSVERSAL,
    LEVEL_CRITICAL,
    TRACE_BREAK,
    NOT_SUBMERSIVE,
    MODE_UNSUPPORTED,
    PARSE_ERROR,
    UNRESOLVED_LABEL,
    TYPE_ERROR,
    COMMAND_SCENARIO_MISMATCH,
    UNSUPPORTED,
};

inline const char* to_string(ErrCode c) {
    switch (c) {
        case ErrCode::MALFORMED_MATRIX: return "MALFORMED_MATRIX";
        case ErrCode::EMPTY_GROUP: return "EMPTY_GROUP";
        case ErrCode::POINT_OUTSIDE_DOMAIN: return "POINT_OUTSIDE_DOMAIN";
        case ErrCode::NOT_IN_OVERLAP: return "NOT_IN_OVERLAP";
        case ErrCode::DEGREE_OVERFLOW: return "DEGREE_OVERFLOW";
        case ErrCode::NON_DIFFERENTIABLE: return "NON_DIFFERENTIABLE";
        case ErrCode::COVER_GAP: return "COVER_GAP";
        case ErrCode::QUADRATURE_DIVERGED: return "QUADRATURE_DIVERGED";
        case ErrCode::EQUIVARIANCE_FAIL: return "EQUIVARIANCE_FAIL";
        case ErrCode::UNVERIFIED_EMBEDDING: return "UNVERIFIED_EMBEDDING";
        case ErrCode::DOMAIN_TOO_SMALL: return "DOMAIN_TOO_SMALL";
        case ErrCode::SINGULAR_NORMAL_DERIVATIVE: return "SINGULAR_NORMAL_DERIVATIVE";
        case ErrCode::SHRINK_EXHAUSTED: return "SHRINK_EXHAUSTED";
        case ErrCode::INCOMPATIBLE_CHARTS: return "INCOMPATIBLE_CHARTS";
        case ErrCode::NOT_PROPER: return "NOT_PROPER";
        case ErrCode::DIM_MISMATCH: return "DIM_MISMATCH";
        case ErrCode::NOT_TRANSVERSAL: return "NOT_TRANSVERSAL";
        case ErrCode::EFFECTIVITY_LOST: return "EFFECTIVITY_LOST";
        case ErrCode::NO_PERMUTATION_FOUND: return "NO_PERMUTATION_FOUND";
        case ErrCode::MISSING_EXTENSION_DATA: return "MISSING_EXTENSION_DATA";
        case ErrCode::DERIVATIVE_UNAVAILABLE: return "DERIVATIVE_UNAVAILABLE";
        case ErrCode::TRANSVERSALITY_RETRY_EXHAUSTED: return "TRANSVERSALITY_RETRY_EXHAUSTED";
        case ErrCode::MISSING_POU: return "MISSING_POU";
        case ErrCode::OMEGA_NOT_NORMALIZED: return "OMEGA_NOT_NORMALIZED";
        case ErrCode::FILTER_INDUCTION_STUCK: return "FILTER_INDUCTION_STUCK";
        case ErrCode::NEWTON_NONCONVERGENT_SEEDS: return "NEWTON_NONCONVERGENT_SEEDS";
        case ErrCode::NOT_VDIM0: return "NOT_VDIM0";
        case ErrCode::SIGN_UNDETERMINED: return "SIGN_UNDETERMINED";
        case ErrCode::BOUNDARY_NOT_TRANSVERSAL: return "BOUNDARY_NOT_TRANSVERSAL";
        case ErrCode::LEVEL_CRITICAL: return "LEVEL_CRITICAL";
        case ErrCode::TRACE_BREAK: return "TRACE_BREAK";
        case ErrCode::NOT_SUBMERSIVE: return "NOT_SUBMERSIVE";
        case ErrCode::MODE_UNSUPPORTED: return "MODE_UNSUPPORTED";
        case ErrCode::PARSE_ERROR: return "PARSE_ERROR";
        case ErrCode::UNRESOLVED_LABEL: return "UNRESOLVED_LABEL";
        case ErrCode::TYPE_ERROR: return "TYPE_ERROR";
        case ErrCode::COMMAND_SCENARIO_MISMATCH: return "COMMAND_SCENARIO_MISMATCH";
        case ErrCode::UNSUPPORTED: return "UNSUPPORTED";
    }
    return "UNKNOWN";
}

class VfcError : public std::runtime_error {
  public:
    VfcError(ErrCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrCode code() const { return code_; }

  private:
    ErrCode code_;
};

// Default numeric tolerances. Scenario files may override some of them.
struct Tolerances {
    double tau_grp = 1e-10;    // group axiom residuals
    double tau_eq = 1e-8;      // equivariance / compatibility residuals
    double tau_form = 1e-8;    // form invariance residuals
    double tau_pou = 1e-10;    // partition-of-unity sum residual
    double tau_rank = 1e-6;    // smallest singular value certifying full rank
    double tau_omega = 1e-10;  // |int omega - 1|
    double tau_zero = 1e-8;    // |s_i(p)| below which a branch counts as vanishing
    double tau_det = 1e-8;     // |det| below which a sign is refused
    double h_fd = 1e-5;        // central finite-difference step
    double delta_hd = 1e-3;    // Hausdorff separation margin for the glued space
    double r_dedup = 1e-6;     // zero dedup radius in global coordinates
    double delta_U = 0.1;      // metric neighborhood U(X) radius
    double h_trace = 1e-2;     // pseudo-arclength step for curve tracing
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
    int grid_density = 16;     // Newton seeds per box dimension
    int sample_density = 32;   // verification samples per box dimension
    int quad_order = 16;       // Gauss-Legendre order per dimension
    int max_shrink = 20;
    int max_retry = 16;
};

}  // namespace vfckit
