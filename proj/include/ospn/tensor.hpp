#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ospn/error.hpp"

namespace ospn {

// Dense row-major tensor of doubles. Rank 1 or 2 is all the MLP stack needs.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;
};

// A trainable parameter: values plus an accumulated gradient of equal shape.
struct ParamTensor {
    Tensor value;
    Tensor grad;
    std::string id;
    // Set when backward() deposits a gradient; cleared by the optimizer step.
    bool grad_fresh = false;

    ParamTensor() = default;
    ParamTensor(std::string id_, Tensor value_);

    void zero_grad();
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* what);
void check_finite(const Tensor& t, const char* what);

} // namespace ospn
