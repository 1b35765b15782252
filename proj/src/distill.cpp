#include "fapd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fapd/error.hpp"

namespace fapd {

namespace {

constexpr double kDegenerateNorm = 1e-12;

Vector log_softmax(const Vector& logits) {
    const double lse = log_sum_exp(logits.span());
    Vector out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

// Chain rule through u = z / |z|: (g - u (u.g)) / |z|.
Vector normalize_backward(const Vector& z, const Vector& u, const Vector& grad_u) {
    const double norm = norm2(z.span());
    Vector out(z.size());
    if (norm <= kDegenerateNorm) return out;
    const double along = dot(u.span(), grad_u.span());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = (grad_u[i] - u[i] * along) / norm;
    return out;
}

}  // namespace

KdDirection parse_kd_direction(std::string_view text) {
    if (text == "teacher_student") return KdDirection::TeacherStudent;
    if (text == "student_teacher") return KdDirection::StudentTeacher;
    fail(ErrorKind::InvalidInput, "unknown kd_direction '" + std::string(text) +
                                      "' (expected teacher_student or student_teacher)");
}

std::string_view to_string(KdDirection direction) noexcept {
    return direction == KdDirection::TeacherStudent ? "teacher_student" : "student_teacher";
}

void LossWeights::validate() const {
    require(std::isfinite(lambda_kd) && lambda_kd >= 0.0, "lambda_kd must be finite and >= 0");
    require(std::isfinite(lambda_cl) && lambda_cl >= 0.0, "lambda_cl must be finite and >= 0");
    require(std::isfinite(tau) && tau > 0.0, "tau must be > 0");
}

double log_sum_exp(std::span<const double> values) {
    require(!values.empty(), "log_sum_exp: empty input");
    const double top = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - top);
    return top + std::log(sum);
}

Vector softmax(const Vector& logits) {
    require(!logits.empty(), "softmax: empty input");
    const double top = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

LossGrad ce_loss(const Vector& logits, std::uint32_t label) {
    require(label < logits.size(), "ce_loss: label " + std::to_string(label) + " out of range for " +
                                       std::to_string(logits.size()) + " classes");
    const double lse = log_sum_exp(logits.span());
    LossGrad out{lse - logits[label], softmax(logits)};
    out.grad[label] -= 1.0;
    return out;
}

LossGrad kd_loss(const Vector& student, const Vector& teacher, KdDirection direction) {
    require(!student.empty(), "kd_loss: empty feature vector");
    require(student.size() == teacher.size(), "kd_loss: student has " + std::to_string(student.size()) +
                                                  " dims, teacher has " + std::to_string(teacher.size()));
    const Vector u = l2_normalize(student);
    const Vector log_q = log_softmax(u);
    const Vector log_p = log_softmax(l2_normalize(teacher));
    const std::size_t k = student.size();

    LossGrad out;
    Vector grad_u(k);
    if (direction == KdDirection::TeacherStudent) {
        for (std::size_t i = 0; i < k; ++i) {
            const double p = std::exp(log_p[i]);
            out.loss += p * (log_p[i] - log_q[i]);
            grad_u[i] = std::exp(log_q[i]) - p;
        }
    } else {
        for (std::size_t i = 0; i < k; ++i) out.loss += std::exp(log_q[i]) * (log_q[i] - log_p[i]);
        for (std::size_t i = 0; i < k; ++i)
            grad_u[i] = std::exp(log_q[i]) * (log_q[i] - log_p[i] - out.loss);
    }
    out.loss = std::max(out.loss, 0.0);
    out.grad = normalize_backward(student, u, grad_u);
    return out;
}

LossGrad infonce_loss(const Vector& student, const Matrix& anchors, std::uint32_t label, double tau) {
    require(tau > 0.0, "infonce_loss: tau must be > 0");
    require(label < anchors.rows(), "infonce_loss: label " + std::to_string(label) + " out of range for " +
                                        std::to_string(anchors.rows()) + " anchors");
    require(anchors.cols() == student.size(), "infonce_loss: anchor dim does not match feature dim");

    const double student_norm = norm2(student.span());
    if (student_norm <= kDegenerateNorm)
        fail(ErrorKind::DegenerateSimilarity, "infonce_loss: zero-norm student feature");
    const std::size_t classes = anchors.rows();
    const std::size_t k = student.size();

    Vector u(k);
    for (std::size_t i = 0; i < k; ++i) u[i] = student[i] / student_norm;

    Matrix unit_anchors(classes, k);
    Vector scaled(classes);
    Vector similarity(classes);
    for (std::size_t j = 0; j < classes; ++j) {
        auto a = anchors.row(j);
        const double an = norm2(a);
        if (an <= kDegenerateNorm)
            fail(ErrorKind::DegenerateSimilarity, "infonce_loss: zero-norm anchor for class " + std::to_string(j));
        auto dst = unit_anchors.row(j);
        for (std::size_t i = 0; i < k; ++i) dst[i] = a[i] / an;
        similarity[j] = dot(u.span(), dst);
        scaled[j] = similarity[j] / tau;
    }

    LossGrad out;
    out.loss = log_sum_exp(scaled.span()) - scaled[label];
    const Vector weights = softmax(scaled);
    out.grad = Vector(k);
    for (std::size_t j = 0; j < classes; ++j) {
        const double w = (weights[j] - (j == label ? 1.0 : 0.0)) / tau;
        if (w == 0.0) continue;
        auto a = unit_anchors.row(j);
        for (std::size_t i = 0; i < k; ++i) out.grad[i] += w * (a[i] - similarity[j] * u[i]) / student_norm;
    }
    return out;
}

double total_loss(double ce, double kd, double cl, const LossWeights& weights) {
    require(std::isfinite(ce) && std::isfinite(kd) && std::isfinite(cl), "total_loss: non-finite component");
    return ce + weights.lambda_kd * kd + weights.lambda_cl * cl;
}

ClassAnchors build_class_anchors(const FederatedDataset& data) {
    require(data.num_classes >= 1, "build_class_anchors: dataset has no classes");
    Matrix sums(data.num_classes, data.teacher_dim);
    std::vector<std::size_t> counts(data.num_classes, 0);
    for (const auto& s : data.samples) {
        require(s.y < data.num_classes, "build_class_anchors: label out of range");
        auto row = sums.row(s.y);
        for (std::size_t i = 0; i < data.teacher_dim; ++i) row[i] += s.zt[i];
        ++counts[s.y];
    }
    for (std::size_t j = 0; j < data.num_classes; ++j) {
        require(counts[j] > 0, "build_class_anchors: class " + std::to_string(j) + " has no samples");
        for (double& v : sums.row(j)) v /= static_cast<double>(counts[j]);
    }
    return ClassAnchors{std::move(sums)};
}

}  // namespace fapd
