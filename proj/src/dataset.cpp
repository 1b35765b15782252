#include "fapd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "json.hpp"

#include "fapd/binary_io.hpp"
#include "fapd/error.hpp"
#include "fapd/rng.hpp"

namespace fapd {

namespace {

constexpr int kPartitionRetries = 100;
constexpr int kFormatVersion = 1;

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, Stream& stream) {
    Matrix m(rows, cols);
    for (double& v : m.span()) v = stream.normal();
    return m;
}

FederatedDataset draw_split(const SyntheticSpec& spec, const Matrix& means, const Matrix& teacher, std::size_t n,
                            Stream stream) {
    FederatedDataset out;
    out.num_classes = spec.num_classes;
    out.input_dim = spec.input_dim;
    out.teacher_dim = spec.teacher_dim;
    out.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.y = static_cast<std::uint32_t>(i % spec.num_classes);
        s.x = Vector(spec.input_dim);
        auto mean = means.row(s.y);
        for (std::size_t j = 0; j < spec.input_dim; ++j) s.x[j] = mean[j] + spec.noise_sigma * stream.normal();
        s.zt = project(teacher, s.x);
        out.samples.push_back(std::move(s));
    }
    return out;
}

// Largest-remainder split of `total` by `weights` (which sum to 1); ties in
// the fractional part go to the lowest index.
std::vector<std::size_t> apportion(std::span<const double> weights, std::size_t total) {
    const std::size_t n = weights.size();
    std::vector<std::size_t> counts(n);
    std::vector<double> fraction(n);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < n; ++c) {
        const double exact = weights[c] * static_cast<double>(total);
        const double whole = std::floor(exact);
        counts[c] = static_cast<std::size_t>(whole);
        fraction[c] = exact - whole;
        assigned += counts[c];
    }
    // Floating error can overshoot by a unit; trim from the smallest remainders.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fraction[a] > fraction[b]; });
    std::size_t i = 0;
    while (assigned < total) {
        ++counts[order[i % n]];
        ++assigned;
        ++i;
    }
    for (std::size_t j = n; assigned > total && j > 0; --j) {
        const std::size_t c = order[j - 1];
        if (counts[c] > 0) {
            --counts[c];
            --assigned;
        }
    }
    return counts;
}

std::size_t json_count(const nlohmann::json& meta, const char* key, const std::filesystem::path& path) {
    if (!meta.contains(key) || !meta[key].is_number_unsigned())
        fail(ErrorKind::Format, path.string() + ": missing or non-integer key '" + key + "'");
    return meta[key].get<std::size_t>();
}

}  // namespace

std::vector<std::uint32_t> FederatedDataset::labels() const {
    std::vector<std::uint32_t> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.y);
    return out;
}

void FederatedDataset::validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const std::string where = "sample " + std::to_string(i);
        require(s.x.size() == input_dim, where + ": input dim " + std::to_string(s.x.size()) + " != " +
                                             std::to_string(input_dim));
        require(s.zt.size() == teacher_dim, where + ": teacher dim " + std::to_string(s.zt.size()) + " != " +
                                                std::to_string(teacher_dim));
        require(s.y < num_classes, where + ": label " + std::to_string(s.y) + " >= num_classes " +
                                       std::to_string(num_classes));
        require(all_finite(s.x.span()) && all_finite(s.zt.span()), where + ": non-finite value");
    }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    require(spec.num_classes >= 2, "generate_synthetic: need at least 2 classes");
    require(spec.input_dim >= spec.num_classes, "generate_synthetic: input_dim must be >= num_classes");
    require(spec.teacher_dim >= 2, "generate_synthetic: teacher_dim must be >= 2");
    require(spec.noise_sigma > 0.0 && std::isfinite(spec.noise_sigma), "generate_synthetic: noise_sigma must be > 0");
    require(spec.teacher_decay > 0.0 && spec.teacher_scale > 0.0, "generate_synthetic: teacher spectrum must be positive");

    SyntheticData data;

    Stream mean_stream(spec.seed, "synthetic/class-means");
    data.class_means = gaussian_matrix(spec.num_classes, spec.input_dim, mean_stream);
    for (double& v : data.class_means.span()) v *= spec.class_mean_scale;

    const std::size_t rank = std::min(spec.teacher_dim, spec.input_dim);
    Stream u_stream(spec.seed, "synthetic/teacher-left");
    Stream b_stream(spec.seed, "synthetic/teacher-right");
    const Matrix left = orthonormalize_columns(gaussian_matrix(spec.teacher_dim, rank, u_stream));
    const Matrix right = orthonormalize_columns(gaussian_matrix(spec.input_dim, rank, b_stream));

    data.teacher_map = Matrix(spec.teacher_dim, spec.input_dim);
    double singular = spec.teacher_scale;
    for (std::size_t i = 0; i < rank; ++i, singular *= spec.teacher_decay) {
        for (std::size_t r = 0; r < spec.teacher_dim; ++r) {
            const double ur = left(r, i) * singular;
            for (std::size_t c = 0; c < spec.input_dim; ++c) data.teacher_map(r, c) += ur * right(c, i);
        }
    }

    data.train = draw_split(spec, data.class_means, data.teacher_map, spec.n_train,
                            Stream(spec.seed, "synthetic/train"));
    data.test = draw_split(spec, data.class_means, data.teacher_map, spec.n_test, Stream(spec.seed, "synthetic/test"));
    return data;
}

Partition dirichlet_partition(std::span<const std::uint32_t> labels, std::size_t num_clients, double alpha,
                              std::uint64_t seed) {
    require(num_clients >= 1, "dirichlet_partition: need at least one client");
    require(alpha > 0.0 && std::isfinite(alpha), "dirichlet_partition: alpha must be > 0");
    require(!labels.empty(), "dirichlet_partition: no labels");

    const std::uint32_t num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    for (int attempt = 0; attempt <= kPartitionRetries; ++attempt) {
        Stream stream(hash64(seed, tag64("dirichlet-partition"), static_cast<std::uint64_t>(attempt)));
        std::vector<std::vector<std::size_t>> assignments(num_clients);
        bool degenerate = false;

        for (const auto& members : by_class) {
            if (members.empty()) continue;
            std::vector<std::size_t> shuffled = members;
            stream.shuffle(std::span<std::size_t>(shuffled));

            std::vector<double> weights(num_clients);
            double total = 0.0;
            for (double& w : weights) {
                w = stream.gamma(alpha);
                total += w;
            }
            if (!(total > 0.0) || !std::isfinite(total)) {
                degenerate = true;
                break;
            }
            for (double& w : weights) w /= total;

            const auto counts = apportion(weights, shuffled.size());
            std::size_t cursor = 0;
            for (std::size_t c = 0; c < num_clients; ++c) {
                for (std::size_t k = 0; k < counts[c]; ++k) assignments[c].push_back(shuffled[cursor++]);
            }
        }
        if (degenerate) continue;
        const bool any_empty =
            std::any_of(assignments.begin(), assignments.end(), [](const auto& a) { return a.empty(); });
        if (any_empty) continue;

        for (auto& a : assignments) std::sort(a.begin(), a.end());
        return Partition{std::move(assignments), alpha, seed};
    }
    fail(ErrorKind::PartitionFailure, "dirichlet_partition: every draw left a client empty after " +
                                          std::to_string(kPartitionRetries) + " retries (clients=" +
                                          std::to_string(num_clients) + ", alpha=" + std::to_string(alpha) + ")");
}

std::vector<std::size_t> calibration_indices(std::size_t n, std::size_t m, std::uint64_t seed) {
    require(m >= 2 && m <= n, "calibration size " + std::to_string(m) + " outside [2, " + std::to_string(n) + "]");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Stream stream(seed, "calibration");
    stream.shuffle(std::span<std::size_t>(order));
    order.resize(m);
    return order;
}

Matrix sample_calibration(const FederatedDataset& dataset, std::size_t m, std::uint64_t seed) {
    const auto chosen = calibration_indices(dataset.size(), m, seed);
    Matrix out(m, dataset.teacher_dim);
    for (std::size_t r = 0; r < m; ++r) {
        const auto& zt = dataset.samples[chosen[r]].zt;
        std::copy(zt.begin(), zt.end(), out.row(r).begin());
    }
    return out;
}

FederatedDataset subset(const FederatedDataset& dataset, std::span<const std::size_t> indices) {
    FederatedDataset out;
    out.num_classes = dataset.num_classes;
    out.input_dim = dataset.input_dim;
    out.teacher_dim = dataset.teacher_dim;
    out.samples.reserve(indices.size());
    for (std::size_t i : indices) {
        require(i < dataset.size(), "subset: index out of range");
        out.samples.push_back(dataset.samples[i]);
    }
    return out;
}

void save_dataset(const FederatedDataset& dataset, const std::filesystem::path& dir) {
    dataset.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

    nlohmann::ordered_json meta;
    meta["format_version"] = kFormatVersion;
    meta["num_samples"] = dataset.size();
    meta["num_classes"] = dataset.num_classes;
    meta["input_dim"] = dataset.input_dim;
    meta["teacher_dim"] = dataset.teacher_dim;
    io::write_text(dir / "meta.json", meta.dump(2) + "\n");

    std::vector<double> x;
    std::vector<double> zt;
    std::vector<std::uint32_t> y;
    x.reserve(dataset.size() * dataset.input_dim);
    zt.reserve(dataset.size() * dataset.teacher_dim);
    y.reserve(dataset.size());
    for (const auto& s : dataset.samples) {
        x.insert(x.end(), s.x.begin(), s.x.end());
        zt.insert(zt.end(), s.zt.begin(), s.zt.end());
        y.push_back(s.y);
    }
    io::write_f64(dir / "x.f64", x);
    io::write_f64(dir / "zt.f64", zt);
    io::write_u32(dir / "y.u32", y);
}

FederatedDataset load_dataset(const std::filesystem::path& dir) {
    const auto meta_path = dir / "meta.json";
    const std::string text = io::read_text(meta_path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Format, meta_path.string() + ": malformed header at byte offset " + std::to_string(e.byte));
    }
    if (!meta.is_object()) fail(ErrorKind::Format, meta_path.string() + ": header is not a JSON object");
    const std::size_t version = json_count(meta, "format_version", meta_path);
    if (version != kFormatVersion)
        fail(ErrorKind::Format, meta_path.string() + ": unsupported format_version " + std::to_string(version));

    FederatedDataset out;
    const std::size_t n = json_count(meta, "num_samples", meta_path);
    out.num_classes = json_count(meta, "num_classes", meta_path);
    out.input_dim = json_count(meta, "input_dim", meta_path);
    out.teacher_dim = json_count(meta, "teacher_dim", meta_path);

    const auto x = io::read_f64(dir / "x.f64", n * out.input_dim);
    const auto zt = io::read_f64(dir / "zt.f64", n * out.teacher_dim);
    const auto y = io::read_u32(dir / "y.u32", n);

    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = out.samples[i];
        if (y[i] >= out.num_classes)
            fail(ErrorKind::Format, (dir / "y.u32").string() + ": label " + std::to_string(y[i]) +
                                        " at byte offset " + std::to_string(i * sizeof(std::uint32_t)) +
                                        " is not below num_classes " + std::to_string(out.num_classes));
        s.y = y[i];
        s.x = Vector(std::span<const double>(x).subspan(i * out.input_dim, out.input_dim));
        s.zt = Vector(std::span<const double>(zt).subspan(i * out.teacher_dim, out.teacher_dim));
        if (!all_finite(s.x.span()) || !all_finite(s.zt.span()))
            fail(ErrorKind::Format, dir.string() + ": non-finite value in sample " + std::to_string(i));
    }
    return out;
}

}  // namespace fapd
