#pragma once

#include <cstddef>
#include <vector>

#include "fapd/linalg.hpp"

namespace fapd {

// PCA basis of the calibration teacher features. Row i of `rotation` is the
// i-th principal direction, rows ordered by non-increasing eigenvalue.
struct RotationMatrix {
    Matrix rotation;                   // D x D, orthogonal
    std::vector<double> eigenvalues;   // non-increasing, clamped to >= 0
    Vector mean;                       // calibration mean, used to center projections

    std::size_t dim() const noexcept { return rotation.rows(); }
};

RotationMatrix build_rotation(const Matrix& calibration);

// First k rows of the rotation.
Matrix projection_for(const RotationMatrix& rot, std::size_t k);

// P (z - mean).
Vector project_features(const RotationMatrix& rot, const Matrix& projection, const Vector& z);

// Anchor rows projected with project_features(): K x k.
Matrix project_anchors(const RotationMatrix& rot, const Matrix& projection, const Matrix& anchors);

struct CurriculumParams {
    std::size_t k0 = 8;
    std::size_t delta_k = 5;
    double epsilon = 0.005;
    std::size_t window = 3;
    std::size_t max_dim = 512;

    void validate() const;
};

// Consensus-paced dimension controller. Accuracy history is append-only and
// k never decreases.
struct CurriculumState {
    CurriculumParams params;
    std::size_t k = 0;
    std::vector<double> history;

    static CurriculumState start(const CurriculumParams& params);
};

// True iff the history holds at least `window` entries and the latest entry
// is within epsilon (strictly) of each of the window-1 entries before it.
bool stability(const CurriculumState& state);

// k <- min(k + delta_k, D) when stable, else unchanged.
CurriculumState advance(CurriculumState state);

CurriculumState record_accuracy(CurriculumState state, double accuracy);

}  // namespace fapd
