#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ospn/tensor.hpp"

namespace ospn {

struct Dataset {
    Tensor features;          // [n, d]
    std::vector<int> labels;  // in [0, num_classes)
    int num_classes = 0;
    std::string split;        // "train" or "validation"

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
    void validate() const;
};

// The hidden labeling function behind the synthetic task: a fixed random
// tanh MLP. Kept around so tests can check label agreement.
struct SyntheticTeacher {
    Tensor w1, b1, w2, b2;
    Tensor logits(const Tensor& x) const;
};

struct SyntheticSpec {
    std::uint64_t seed = 1;
    std::size_t n = 8000;
    std::size_t dim = 16;
    std::size_t classes = 4;
    std::size_t teacher_width = 16;
    double label_noise = 0.05;
};

struct SyntheticData {
    Dataset train;
    Dataset val;
    SyntheticTeacher teacher;
    int attempts = 0;
};

// Inputs uniform on [-1,1]^d, labels = argmax of a random teacher MLP with a
// label_noise chance of flipping to a uniformly random other class. The
// teacher is redrawn (bounded retries) until every class holds >= 5% of the
// examples. Deterministic in the spec. 90/10 train/validation split.
SyntheticData gen_synthetic(const SyntheticSpec& spec);

// CSV with header "f0,...,f{d-1},label". Parse errors carry the 1-based line.
Dataset load_csv(const std::string& path, int num_classes, const std::string& split_tag);
void save_csv(const Dataset& data, const std::string& path);

} // namespace ospn
