#pragma once

#include <cstdint>
#include <string_view>

#include "fapd/dataset.hpp"
#include "fapd/linalg.hpp"

namespace fapd {

// Which argument order the feature KL divergence uses.
enum class KdDirection {
    TeacherStudent,  // KL(softmax(teacher) || softmax(student)), default
    StudentTeacher,  // KL(softmax(student) || softmax(teacher))
};

KdDirection parse_kd_direction(std::string_view text);
std::string_view to_string(KdDirection direction) noexcept;

struct LossWeights {
    double lambda_kd = 0.5;
    double lambda_cl = 0.5;
    double tau = 0.04;  // InfoNCE temperature

    void validate() const;
};

// Per-class reference vectors in teacher space (K x D).
struct ClassAnchors {
    Matrix anchors;
};

struct LossGrad {
    double loss = 0.0;
    Vector grad;  // d loss / d input
};

Vector softmax(const Vector& logits);
double log_sum_exp(std::span<const double> values);

// -log softmax(logits)[label]; grad is softmax - onehot.
LossGrad ce_loss(const Vector& logits, std::uint32_t label);

// KL divergence between softmax(l2_normalize(.)) of the projected teacher
// and student features; grad is with respect to the (unnormalized) student.
LossGrad kd_loss(const Vector& student, const Vector& teacher, KdDirection direction = KdDirection::TeacherStudent);

// InfoNCE over cosine similarities to every class anchor (positive included
// in the denominator). Zero-norm student or anchor rows are rejected with
// DegenerateSimilarity.
LossGrad infonce_loss(const Vector& student, const Matrix& anchors, std::uint32_t label, double tau);

double total_loss(double ce, double kd, double cl, const LossWeights& weights);

// Per-class mean of teacher features.
ClassAnchors build_class_anchors(const FederatedDataset& data);

}  // namespace fapd
