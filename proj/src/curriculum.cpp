#include "fapd/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fapd/error.hpp"

namespace fapd {

RotationMatrix build_rotation(const Matrix& calibration) {
    const Matrix cov = covariance(calibration);
    EigenResult eig = eig_sym(cov);

    RotationMatrix rot;
    rot.rotation = transpose(eig.eigenvectors);
    rot.eigenvalues = std::move(eig.eigenvalues);
    for (double& v : rot.eigenvalues) v = std::max(v, 0.0);
    rot.mean = column_mean(calibration);
    return rot;
}

Matrix projection_for(const RotationMatrix& rot, std::size_t k) {
    require(k >= 1 && k <= rot.dim(), "projection_for: k=" + std::to_string(k) + " outside [1, " +
                                          std::to_string(rot.dim()) + "]");
    const auto& r = rot.rotation;
    return Matrix(k, r.cols(), std::vector<double>(r.values().begin(),
                                                   r.values().begin() + static_cast<std::ptrdiff_t>(k * r.cols())));
}

Vector project_features(const RotationMatrix& rot, const Matrix& projection, const Vector& z) {
    require(z.size() == rot.mean.size(), "project_features: feature has " + std::to_string(z.size()) +
                                             " dims, rotation expects " + std::to_string(rot.mean.size()));
    Vector centered(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) centered[i] = z[i] - rot.mean[i];
    return project(projection, centered);
}

Matrix project_anchors(const RotationMatrix& rot, const Matrix& projection, const Matrix& anchors) {
    Matrix out(anchors.rows(), projection.rows());
    for (std::size_t j = 0; j < anchors.rows(); ++j) {
        const Vector projected = project_features(rot, projection, Vector(anchors.row(j)));
        std::copy(projected.begin(), projected.end(), out.row(j).begin());
    }
    return out;
}

void CurriculumParams::validate() const {
    require(max_dim >= 1, "curriculum: max dimension must be >= 1");
    require(k0 >= 1 && k0 <= max_dim, "curriculum: k0=" + std::to_string(k0) + " outside [1, " +
                                          std::to_string(max_dim) + "]");
    require(delta_k >= 1, "curriculum: delta_k must be >= 1");
    require(window >= 2, "curriculum: consensus window must be >= 2");
    require(epsilon > 0.0 && std::isfinite(epsilon), "curriculum: epsilon must be > 0");
}

CurriculumState CurriculumState::start(const CurriculumParams& params) {
    params.validate();
    return CurriculumState{params, params.k0, {}};
}

bool stability(const CurriculumState& state) {
    const auto& h = state.history;
    const std::size_t n = state.params.window;
    if (h.size() < n) return false;
    const double latest = h.back();
    for (std::size_t back = 1; back < n; ++back) {
        if (!(std::abs(latest - h[h.size() - 1 - back]) < state.params.epsilon)) return false;
    }
    return true;
}

CurriculumState advance(CurriculumState state) {
    if (stability(state)) state.k = std::min(state.k + state.params.delta_k, state.params.max_dim);
    return state;
}

CurriculumState record_accuracy(CurriculumState state, double accuracy) {
    require(accuracy >= 0.0 && accuracy <= 1.0, "record_accuracy: accuracy " + std::to_string(accuracy) +
                                                    " outside [0, 1]");
    state.history.push_back(accuracy);
    return state;
}

}  // namespace fapd
