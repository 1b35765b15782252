#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fapd/linalg.hpp"

namespace fapd {

struct ModelDims {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t feature_dim = 0;  // equals the teacher dimension
    std::size_t num_classes = 0;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Parameter tensors in declaration order: w1, b1, w2, b2, w3, b3.
struct Parameters {
    Matrix w1;  // hidden x input
    Vector b1;
    Matrix w2;  // feature x hidden
    Vector b2;
    Matrix w3;  // classes x feature
    Vector b3;

    static Parameters zeros(const ModelDims& dims);

    template <typename F>
    void for_each(F&& f) {
        f(w1.span()); f(b1.span()); f(w2.span()); f(b2.span()); f(w3.span()); f(b3.span());
    }
    template <typename F>
    void for_each(F&& f) const {
        f(w1.span()); f(b1.span()); f(w2.span()); f(b2.span()); f(w3.span()); f(b3.span());
    }

    std::size_t count() const noexcept;
    bool same_shape(const Parameters& other) const noexcept;
    bool finite() const noexcept;
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);

    friend bool operator==(const Parameters&, const Parameters&) = default;
};

// MLP student: hidden = relu(W1 x + b1), features = W2 hidden + b2 (linear),
// logits = W3 features + b3.
struct StudentModel {
    ModelDims dims;
    std::uint64_t seed = 0;
    Parameters params;

    friend bool operator==(const StudentModel&, const StudentModel&) = default;
};

struct Gradients {
    Parameters values;
};

// SGD with velocity-form momentum: v <- m v + g; theta <- theta - lr v.
struct OptimizerState {
    Parameters velocity;
    double lr = 0.01;
    double momentum = 0.9;

    static OptimizerState for_model(const StudentModel& model, double lr, double momentum);
};

// Intermediates kept by forward() for backward().
struct Activations {
    Vector input;
    Vector hidden_pre;
    Vector hidden;
    Vector features;  // z_S
    Vector logits;
};

// Glorot-uniform weights, zero biases.
StudentModel init_model(const ModelDims& dims, std::uint64_t seed);

Activations forward(const StudentModel& model, const Vector& x);

// Adds scale * d(loss)/d(params) to `into`, where d_logits and d_features are
// the upstream partials at the head output and the feature layer.
void accumulate_gradients(const StudentModel& model, const Activations& act, const Vector& d_logits,
                          const Vector& d_features, Gradients& into, double scale = 1.0);

Gradients backward(const StudentModel& model, const Activations& act, const Vector& d_logits,
                   const Vector& d_features);

void sgd_step(StudentModel& model, OptimizerState& opt, const Gradients& grads);

// model.json (dims, seed) + params.f64 flat little-endian blob.
void save_checkpoint(const StudentModel& model, const std::filesystem::path& dir);
StudentModel load_checkpoint(const std::filesystem::path& dir);

// In-process message payload: the params.f64 byte layout.
std::vector<std::uint8_t> encode_parameters(const Parameters& params);
Parameters decode_parameters(const ModelDims& dims, std::span<const std::uint8_t> bytes);

}  // namespace fapd
