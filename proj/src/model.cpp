#include "fapd/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "json.hpp"

#include "fapd/binary_io.hpp"
#include "fapd/error.hpp"
#include "fapd/rng.hpp"

namespace fapd {

namespace {

constexpr int kCheckpointVersion = 1;

void glorot_fill(Matrix& w, Stream& stream) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.span()) v = stream.uniform(-limit, limit);
}

void check_dims(const ModelDims& d) {
    require(d.input_dim >= 1 && d.hidden_dim >= 1 && d.feature_dim >= 1 && d.num_classes >= 1,
            "model dimensions must all be >= 1");
}

std::size_t meta_count(const nlohmann::json& meta, const char* key, const std::filesystem::path& path) {
    if (!meta.contains(key) || !meta[key].is_number_unsigned())
        fail(ErrorKind::Format, path.string() + ": missing or non-integer key '" + key + "'");
    return meta[key].get<std::size_t>();
}

}  // namespace

Parameters Parameters::zeros(const ModelDims& d) {
    return Parameters{Matrix(d.hidden_dim, d.input_dim), Vector(d.hidden_dim),
                      Matrix(d.feature_dim, d.hidden_dim), Vector(d.feature_dim),
                      Matrix(d.num_classes, d.feature_dim), Vector(d.num_classes)};
}

std::size_t Parameters::count() const noexcept {
    std::size_t n = 0;
    for_each([&](auto s) { n += s.size(); });
    return n;
}

bool Parameters::same_shape(const Parameters& o) const noexcept {
    return w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() && b1.size() == o.b1.size() &&
           w2.rows() == o.w2.rows() && w2.cols() == o.w2.cols() && b2.size() == o.b2.size() &&
           w3.rows() == o.w3.rows() && w3.cols() == o.w3.cols() && b3.size() == o.b3.size();
}

bool Parameters::finite() const noexcept {
    bool ok = true;
    for_each([&](auto s) { ok = ok && all_finite(s); });
    return ok;
}

std::vector<double> Parameters::flatten() const {
    std::vector<double> flat;
    flat.reserve(count());
    for_each([&](auto s) { flat.insert(flat.end(), s.begin(), s.end()); });
    return flat;
}

void Parameters::assign(std::span<const double> flat) {
    require(flat.size() == count(), "parameter blob has " + std::to_string(flat.size()) + " values, model needs " +
                                        std::to_string(count()));
    std::size_t offset = 0;
    for_each([&](std::span<double> s) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), s.size(), s.begin());
        offset += s.size();
    });
}

OptimizerState OptimizerState::for_model(const StudentModel& model, double lr, double momentum) {
    require(lr >= 0.0 && std::isfinite(lr), "learning rate must be >= 0");
    require(momentum >= 0.0 && momentum < 1.0, "momentum must be in [0, 1)");
    return OptimizerState{Parameters::zeros(model.dims), lr, momentum};
}

StudentModel init_model(const ModelDims& dims, std::uint64_t seed) {
    check_dims(dims);
    StudentModel model{dims, seed, Parameters::zeros(dims)};
    Stream stream(seed, "model-init");
    glorot_fill(model.params.w1, stream);
    glorot_fill(model.params.w2, stream);
    glorot_fill(model.params.w3, stream);
    return model;
}

Activations forward(const StudentModel& model, const Vector& x) {
    const auto& p = model.params;
    require(x.size() == model.dims.input_dim, "forward: input has " + std::to_string(x.size()) +
                                                  " entries, model expects " + std::to_string(model.dims.input_dim));
    Activations act;
    act.input = x;
    act.hidden_pre = project(p.w1, x);
    act.hidden = Vector(act.hidden_pre.size());
    for (std::size_t i = 0; i < act.hidden_pre.size(); ++i) {
        act.hidden_pre[i] += p.b1[i];
        act.hidden[i] = std::max(act.hidden_pre[i], 0.0);
    }
    act.features = project(p.w2, act.hidden);
    for (std::size_t i = 0; i < act.features.size(); ++i) act.features[i] += p.b2[i];
    act.logits = project(p.w3, act.features);
    for (std::size_t i = 0; i < act.logits.size(); ++i) act.logits[i] += p.b3[i];

    if (!all_finite(act.features.span()) || !all_finite(act.logits.span()))
        fail(ErrorKind::Numeric, "forward: non-finite activation");
    return act;
}

void accumulate_gradients(const StudentModel& model, const Activations& act, const Vector& d_logits,
                          const Vector& d_features, Gradients& into, double scale) {
    const auto& p = model.params;
    const auto& d = model.dims;
    require(act.input.size() == d.input_dim && act.hidden.size() == d.hidden_dim &&
                act.features.size() == d.feature_dim && act.logits.size() == d.num_classes,
            "backward: activations do not match the model");
    require(d_logits.size() == d.num_classes && d_features.size() == d.feature_dim,
            "backward: upstream gradient has the wrong shape");
    require(into.values.same_shape(p), "backward: gradient buffer does not match the model");
    auto& g = into.values;

    // Head.
    for (std::size_t k = 0; k < d.num_classes; ++k) {
        const double dk = scale * d_logits[k];
        if (dk == 0.0) continue;
        g.b3[k] += dk;
        auto row = g.w3.row(k);
        for (std::size_t j = 0; j < d.feature_dim; ++j) row[j] += dk * act.features[j];
    }

    // Feature layer: distillation paths enter here alongside the head's backprop.
    Vector dz = project_adjoint(p.w3, d_logits);
    for (std::size_t j = 0; j < d.feature_dim; ++j) dz[j] += d_features[j];
    for (std::size_t j = 0; j < d.feature_dim; ++j) {
        const double dj = scale * dz[j];
        if (dj == 0.0) continue;
        g.b2[j] += dj;
        auto row = g.w2.row(j);
        for (std::size_t i = 0; i < d.hidden_dim; ++i) row[i] += dj * act.hidden[i];
    }

    Vector dh = project_adjoint(p.w2, dz);
    for (std::size_t i = 0; i < d.hidden_dim; ++i) {
        if (act.hidden_pre[i] <= 0.0) continue;
        const double di = scale * dh[i];
        if (di == 0.0) continue;
        g.b1[i] += di;
        auto row = g.w1.row(i);
        for (std::size_t c = 0; c < d.input_dim; ++c) row[c] += di * act.input[c];
    }
}

Gradients backward(const StudentModel& model, const Activations& act, const Vector& d_logits,
                   const Vector& d_features) {
    Gradients grads{Parameters::zeros(model.dims)};
    accumulate_gradients(model, act, d_logits, d_features, grads);
    return grads;
}

void sgd_step(StudentModel& model, OptimizerState& opt, const Gradients& grads) {
    require(grads.values.same_shape(model.params) && opt.velocity.same_shape(model.params),
            "sgd_step: shape mismatch between model, optimizer state and gradients");
    std::vector<std::span<double>> params;
    std::vector<std::span<double>> velocity;
    std::vector<std::span<const double>> g;
    model.params.for_each([&](std::span<double> s) { params.push_back(s); });
    opt.velocity.for_each([&](std::span<double> s) { velocity.push_back(s); });
    grads.values.for_each([&](std::span<const double> s) { g.push_back(s); });
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t].size(); ++i) {
            velocity[t][i] = opt.momentum * velocity[t][i] + g[t][i];
            params[t][i] -= opt.lr * velocity[t][i];
        }
    }
}

void save_checkpoint(const StudentModel& model, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    nlohmann::ordered_json meta;
    meta["format_version"] = kCheckpointVersion;
    meta["input_dim"] = model.dims.input_dim;
    meta["hidden_dim"] = model.dims.hidden_dim;
    meta["feature_dim"] = model.dims.feature_dim;
    meta["num_classes"] = model.dims.num_classes;
    meta["seed"] = model.seed;
    meta["num_params"] = model.params.count();
    io::write_text(dir / "model.json", meta.dump(2) + "\n");
    io::write_f64(dir / "params.f64", model.params.flatten());
}

StudentModel load_checkpoint(const std::filesystem::path& dir) {
    const auto meta_path = dir / "model.json";
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(io::read_text(meta_path));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Format, meta_path.string() + ": malformed header at byte offset " + std::to_string(e.byte));
    }
    if (!meta.is_object()) fail(ErrorKind::Format, meta_path.string() + ": header is not a JSON object");
    if (meta_count(meta, "format_version", meta_path) != kCheckpointVersion)
        fail(ErrorKind::Format, meta_path.string() + ": unsupported format_version");

    StudentModel model;
    model.dims = {meta_count(meta, "input_dim", meta_path), meta_count(meta, "hidden_dim", meta_path),
                  meta_count(meta, "feature_dim", meta_path), meta_count(meta, "num_classes", meta_path)};
    check_dims(model.dims);
    model.seed = meta_count(meta, "seed", meta_path);
    model.params = Parameters::zeros(model.dims);
    if (meta.contains("num_params") && meta_count(meta, "num_params", meta_path) != model.params.count())
        fail(ErrorKind::Format, meta_path.string() + ": num_params disagrees with the declared dimensions");
    model.params.assign(io::read_f64(dir / "params.f64", model.params.count()));
    if (!model.params.finite()) fail(ErrorKind::Format, dir.string() + ": non-finite parameter");
    return model;
}

std::vector<std::uint8_t> encode_parameters(const Parameters& params) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(params.count() * sizeof(double));
    params.for_each([&](std::span<const double> s) { io::encode_f64(s, bytes); });
    return bytes;
}

Parameters decode_parameters(const ModelDims& dims, std::span<const std::uint8_t> bytes) {
    Parameters params = Parameters::zeros(dims);
    params.assign(io::decode_f64(bytes));
    return params;
}

}  // namespace fapd
