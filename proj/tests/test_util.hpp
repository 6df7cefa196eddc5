#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ospn/evosearch.hpp"
#include "ospn/tensor.hpp"

namespace testutil {

// Max relative error between the analytic gradients already accumulated in
// `params` and central finite differences of `loss_fn`. The loss function
// must be a pure function of the parameter values.
inline double max_grad_rel_error(const std::vector<ospn::ParamTensor*>& params,
                                 const std::function<double()>& loss_fn, double h = 1e-5) {
    double worst = 0.0;
    for (ospn::ParamTensor* p : params) {
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double saved = p->value.data[i];
            p->value.data[i] = saved + h;
            const double up = loss_fn();
            p->value.data[i] = saved - h;
            const double down = loss_fn();
            p->value.data[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p->grad.data[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

// Independent triple-loop oracle for y = x W^T + b with W pre-multiplied by
// an elementwise 0/1 mask.
inline ospn::Tensor naive_masked_linear(const ospn::Tensor& x, const ospn::Tensor& w,
                                        const ospn::Tensor& b,
                                        const std::vector<int>& keep_elementwise) {
    const std::size_t batch = x.rows(), in = x.cols(), out = w.rows();
    ospn::Tensor y = ospn::Tensor::zeros({batch, out});
    for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
            double acc = b.data[o];
            for (std::size_t i = 0; i < in; ++i) {
                const double wm = keep_elementwise[o * in + i] ? w.at(o, i) : 0.0;
                acc += x.at(r, i) * wm;
            }
            y.at(r, o) = acc;
        }
    }
    return y;
}

// High-precision softmax cross entropy, mean over batch.
inline double naive_cross_entropy(const ospn::Tensor& logits, const std::vector<int>& labels) {
    long double total = 0.0L;
    const std::size_t batch = logits.rows(), classes = logits.cols();
    for (std::size_t b = 0; b < batch; ++b) {
        long double sum = 0.0L;
        for (std::size_t c = 0; c < classes; ++c) sum += expl((long double)logits.at(b, c));
        total += logl(sum) - (long double)logits.at(b, (std::size_t)labels[b]);
    }
    return (double)(total / (long double)batch);
}

// High-precision T^2 * KL(softmax(t/T) || softmax(s/T)), mean over batch.
inline double naive_distill_kl(const ospn::Tensor& student, const ospn::Tensor& teacher, double t) {
    const std::size_t batch = student.rows(), classes = student.cols();
    long double total = 0.0L;
    for (std::size_t b = 0; b < batch; ++b) {
        long double zs = 0.0L, zt = 0.0L;
        for (std::size_t c = 0; c < classes; ++c) {
            zs += expl((long double)student.at(b, c) / t);
            zt += expl((long double)teacher.at(b, c) / t);
        }
        for (std::size_t c = 0; c < classes; ++c) {
            const long double pt = expl((long double)teacher.at(b, c) / t) / zt;
            const long double ps = expl((long double)student.at(b, c) / t) / zs;
            total += pt * (logl(pt) - logl(ps));
        }
    }
    return (double)((long double)(t * t) * total / (long double)batch);
}

// 2-D hypervolume of a non-dominated set w.r.t. a reference point that must
// dominate nothing (both coordinates >= every member).
inline double hypervolume(std::vector<ospn::Candidate> front, double ref_loss, double ref_size) {
    std::sort(front.begin(), front.end(), [](const ospn::Candidate& a, const ospn::Candidate& b) {
        return a.size_bytes < b.size_bytes;
    });
    double volume = 0.0;
    double prev_loss = ref_loss;
    for (const ospn::Candidate& c : front) {
        const double width = ref_size - (double)c.size_bytes;
        const double height = prev_loss - c.val_loss;
        if (width > 0.0 && height > 0.0) volume += width * height;
        prev_loss = std::min(prev_loss, c.val_loss);
    }
    return volume;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("ospn_test_" + tag + "_" + std::to_string(counter_++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
    static inline int counter_ = 0;
};

inline bool bitwise_equal(const ospn::Tensor& a, const ospn::Tensor& b) {
    if (a.shape != b.shape) return false;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (a.data[i] != b.data[i]) return false;
    }
    return true;
}

inline std::string read_file(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return {};
    std::string out;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, got);
    std::fclose(f);
    return out;
}

} // namespace testutil
