#pragma once

#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include "ospn/rng.hpp"
#include "ospn/sparsity.hpp"
#include "ospn/tensor.hpp"

namespace ospn {

// y = x (W (.) mask)^T + b. The one matmul everything runs on: the tape's
// linear op and the tape-free eval path both call it.
Tensor linear_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const BlockMask* mask);

// Reverse-mode tape for one forward pass. Nodes are created in topological
// order, so backward() is a reverse sweep over creation order. Parameter
// gradients accumulate directly into ParamTensor::grad, which lets several
// graphs (one per sub-network) contribute to the same accumulated gradient
// before a single optimizer step.
class Graph {
public:
    using NodeId = std::size_t;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Constant leaf; receives a gradient buffer but nothing reads it back.
    NodeId input(Tensor value);

    // y = x (W (.) mask)^T + b. Masked weight positions contribute zero to the
    // output and receive exactly zero gradient; the bias is never masked.
    NodeId linear(NodeId x, ParamTensor& weight, ParamTensor& bias, const BlockMask* mask = nullptr);

    NodeId relu(NodeId x);

    // Inverted dropout, train mode: each element is dropped independently with
    // probability `rate`, survivors are scaled by 1/(1-rate). rate==0 is the
    // identity (returns x itself, consuming no randomness).
    NodeId dropout(NodeId x, double rate, Rng& rng);

    // Mean over the batch of -log softmax(logits)[label].
    NodeId softmax_cross_entropy(NodeId logits, const std::vector<int>& labels);

    // T^2 * KL(softmax(teacher/T) || softmax(student/T)), mean over the batch.
    // The teacher is a plain tensor: no gradient path exists to it.
    NodeId kl_distillation(NodeId student_logits, const Tensor& teacher_logits, double temperature);

    // Scalar combination sum_i coeff_i * node_i.
    NodeId weighted_sum(const std::vector<std::pair<NodeId, double>>& terms);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
    double scalar(NodeId id) const;

    // Seeds d(root)/d(root) = seed and sweeps the tape once. A second call on
    // the same graph is a state error.
    void backward(NodeId root, double seed = 1.0);

    // Distinct parameters this graph touches, in first-use order.
    const std::vector<ParamTensor*>& touched_params() const { return touched_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Graph&)> back;
    };

    NodeId add_node(Tensor value, std::function<void(Graph&)> back = nullptr);
    void touch(ParamTensor& p);

    std::deque<Node> nodes_;
    std::vector<ParamTensor*> touched_;
    bool backward_done_ = false;
};

} // namespace ospn
