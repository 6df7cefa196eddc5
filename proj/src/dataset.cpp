#include "ospn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ospn/error.hpp"
#include "ospn/graph.hpp"
#include "ospn/rng.hpp"
#include "ospn/strings.hpp"

namespace ospn {

namespace {

constexpr int kMaxTeacherAttempts = 32;
constexpr double kMinClassFraction = 0.05;

SyntheticTeacher make_teacher(std::size_t dim, std::size_t width, std::size_t classes, Rng& rng) {
    SyntheticTeacher t;
    const double s1 = 1.5 / std::sqrt(static_cast<double>(dim));
    const double s2 = 1.5 / std::sqrt(static_cast<double>(width));
    t.w1 = Tensor::zeros({width, dim});
    for (double& v : t.w1.data) v = s1 * rng.normal();
    t.b1 = Tensor::zeros({width});
    t.w2 = Tensor::zeros({classes, width});
    for (double& v : t.w2.data) v = s2 * rng.normal();
    t.b2 = Tensor::zeros({classes});
    return t;
}

} // namespace

void Dataset::validate() const {
    if (size() == 0) throw ValueError("empty dataset");
    if (features.rows() != size()) {
        throw DimensionError("feature rows " + std::to_string(features.rows()) + " vs " +
                             std::to_string(size()) + " labels");
    }
    for (int l : labels) {
        if (l < 0 || l >= num_classes) {
            throw ValueError("label " + std::to_string(l) + " outside [0," +
                             std::to_string(num_classes) + ")");
        }
    }
}

Tensor SyntheticTeacher::logits(const Tensor& x) const {
    Tensor h = linear_forward(x, w1, b1, nullptr);
    for (double& v : h.data) v = std::tanh(v);
    return linear_forward(h, w2, b2, nullptr);
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
    if (spec.n == 0 || spec.dim == 0 || spec.classes < 2 || spec.teacher_width == 0) {
        throw ValueError("gen_synthetic: n, dim, teacher_width positive and classes >= 2");
    }
    if (spec.label_noise < 0.0 || spec.label_noise >= 0.5) {
        throw ValueError("label_noise outside [0,0.5)");
    }
    if (spec.n < 10) throw ValueError("need at least 10 examples for a 90/10 split");

    for (int attempt = 0; attempt < kMaxTeacherAttempts; ++attempt) {
        Rng rng(derive_seed(spec.seed, stream::kDataGen, static_cast<std::uint64_t>(attempt)));
        SyntheticTeacher teacher = make_teacher(spec.dim, spec.teacher_width, spec.classes, rng);

        Tensor x = Tensor::zeros({spec.n, spec.dim});
        for (double& v : x.data) v = rng.uniform(-1.0, 1.0);

        const Tensor logits = teacher.logits(x);
        std::vector<int> labels(spec.n);
        std::vector<std::size_t> hist(spec.classes, 0);
        for (std::size_t i = 0; i < spec.n; ++i) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < spec.classes; ++c) {
                if (logits.at(i, c) > logits.at(i, best)) best = c;
            }
            labels[i] = static_cast<int>(best);
            ++hist[best];
        }
        const std::size_t min_count = *std::min_element(hist.begin(), hist.end());
        if (static_cast<double>(min_count) < kMinClassFraction * static_cast<double>(spec.n)) {
            continue;  // degenerate teacher, redraw
        }

        if (spec.label_noise > 0.0) {
            for (std::size_t i = 0; i < spec.n; ++i) {
                if (rng.uniform01() < spec.label_noise) {
                    const std::size_t shift = 1 + rng.below(spec.classes - 1);
                    labels[i] = static_cast<int>((static_cast<std::size_t>(labels[i]) + shift) %
                                                 spec.classes);
                }
            }
        }

        const std::size_t n_train = (spec.n * 9) / 10;
        SyntheticData out;
        out.teacher = std::move(teacher);
        out.attempts = attempt + 1;
        out.train.features = Tensor::zeros({n_train, spec.dim});
        std::copy_n(x.data.begin(), n_train * spec.dim, out.train.features.data.begin());
        out.train.labels.assign(labels.begin(), labels.begin() + static_cast<long>(n_train));
        out.train.num_classes = static_cast<int>(spec.classes);
        out.train.split = "train";
        const std::size_t n_val = spec.n - n_train;
        out.val.features = Tensor::zeros({n_val, spec.dim});
        std::copy_n(x.data.begin() + static_cast<long>(n_train * spec.dim), n_val * spec.dim,
                    out.val.features.data.begin());
        out.val.labels.assign(labels.begin() + static_cast<long>(n_train), labels.end());
        out.val.num_classes = static_cast<int>(spec.classes);
        out.val.split = "validation";
        return out;
    }
    throw ValueError("gen_synthetic: no class-balanced teacher found in " +
                     std::to_string(kMaxTeacherAttempts) + " attempts");
}

Dataset load_csv(const std::string& path, int num_classes, const std::string& split_tag) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split(line, ',');
    if (header.size() < 2 || header.back() != "label") {
        throw ParseError(path + ":1: expected header f0,...,label");
    }
    const std::size_t dim = header.size() - 1;
    for (std::size_t i = 0; i < dim; ++i) {
        if (header[i] != "f" + std::to_string(i)) {
            throw ParseError(path + ":1: expected column f" + std::to_string(i) + ", got '" +
                             header[i] + "'");
        }
    }

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line, ',');
        if (cells.size() != dim + 1) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(dim + 1) + " cells, got " + std::to_string(cells.size()));
        }
        try {
            for (std::size_t i = 0; i < dim; ++i) {
                values.push_back(parse_double(cells[i]));
            }
            const long long label = parse_int(cells[dim]);
            if (label < 0 || label >= num_classes) {
                throw ParseError("label " + std::to_string(label) + " outside [0," +
                                 std::to_string(num_classes) + ")");
            }
            labels.push_back(static_cast<int>(label));
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (labels.empty()) throw ParseError(path + ": no data rows");

    Dataset data;
    data.features = Tensor({labels.size(), dim}, std::move(values));
    data.labels = std::move(labels);
    data.num_classes = num_classes;
    data.split = split_tag;
    return data;
}

void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    const std::size_t dim = data.dim();
    for (std::size_t i = 0; i < dim; ++i) out << 'f' << i << ',';
    out << "label\n";
    for (std::size_t r = 0; r < data.size(); ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            out << format_double(data.features.at(r, c)) << ',';
        }
        out << data.labels[r] << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace ospn
