#include "ospn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "ospn/error.hpp"
#include "ospn/strings.hpp"

namespace ospn {

namespace {

// Row-wise log-sum-exp with the max subtracted first.
void softmax_rows(const Tensor& logits, double inv_temp, Tensor& probs, Tensor* log_probs) {
    const std::size_t batch = logits.rows();
    const std::size_t classes = logits.cols();
    for (std::size_t b = 0; b < batch; ++b) {
        double max_z = -HUGE_VAL;
        for (std::size_t c = 0; c < classes; ++c) {
            max_z = std::max(max_z, logits.at(b, c) * inv_temp);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            sum += std::exp(logits.at(b, c) * inv_temp - max_z);
        }
        const double lse = max_z + std::log(sum);
        for (std::size_t c = 0; c < classes; ++c) {
            const double lp = logits.at(b, c) * inv_temp - lse;
            probs.at(b, c) = std::exp(lp);
            if (log_probs) log_probs->at(b, c) = lp;
        }
    }
}

} // namespace

Graph::NodeId Graph::add_node(Tensor value, std::function<void(Graph&)> back) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back)});
    Node& n = nodes_.back();
    n.grad = Tensor::zeros(n.value.shape);
    return nodes_.size() - 1;
}

void Graph::touch(ParamTensor& p) {
    if (std::find(touched_.begin(), touched_.end(), &p) == touched_.end()) {
        touched_.push_back(&p);
    }
}

Graph::NodeId Graph::input(Tensor value) {
    return add_node(std::move(value));
}

Tensor linear_forward(const Tensor& x, const Tensor& weight, const Tensor& bias,
                      const BlockMask* mask) {
    const std::size_t batch = x.rows();
    const std::size_t in = x.cols();
    const std::size_t out = weight.rows();
    if (weight.cols() != in) {
        throw DimensionError("linear: input " + x.shape_str() + " vs weight " + weight.shape_str());
    }
    if (bias.rank() != 1 || bias.shape[0] != out) {
        throw DimensionError("linear: bias " + bias.shape_str() + " vs out dim " + std::to_string(out));
    }
    if (mask && (mask->rows != out || mask->cols != in)) {
        throw DimensionError("linear: mask " + std::to_string(mask->rows) + "x" + std::to_string(mask->cols) +
                             " vs weight " + weight.shape_str());
    }
    check_finite(x, "linear input");

    Tensor y = Tensor::zeros({batch, out});
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xrow = &x.data[b * in];
        for (std::size_t o = 0; o < out; ++o) {
            const double* wrow = &weight.data[o * in];
            double acc = bias.data[o];
            if (!mask) {
                for (std::size_t i = 0; i < in; ++i) {
                    acc += xrow[i] * wrow[i];
                }
            } else {
                const std::uint8_t* krow = &mask->keep[(o / mask->block_rows) * in];
                for (std::size_t i = 0; i < in; ++i) {
                    if (krow[i]) acc += xrow[i] * wrow[i];
                }
            }
            y.at(b, o) = acc;
        }
    }
    return y;
}

Graph::NodeId Graph::linear(NodeId x, ParamTensor& weight, ParamTensor& bias, const BlockMask* mask) {
    Tensor y = linear_forward(nodes_[x].value, weight.value, bias.value, mask);
    const std::size_t batch = nodes_[x].value.rows();
    const std::size_t in = nodes_[x].value.cols();
    const std::size_t out = weight.value.rows();

    touch(weight);
    touch(bias);
    const bool masked = mask != nullptr;
    NodeId id = add_node(std::move(y));
    nodes_[id].back = [id, x, &weight, &bias, masked, mask = mask ? *mask : BlockMask{},
                       batch, in, out](Graph& g) {
        const Tensor& gy = g.nodes_[id].grad;
        const Tensor& xv2 = g.nodes_[x].value;
        Tensor& gx = g.nodes_[x].grad;
        // dW[o,i] += sum_b gy[b,o] * x[b,i]. Masked positions are never
        // touched: other sub-networks may have accumulated gradient there.
        for (std::size_t b = 0; b < batch; ++b) {
            const double* xrow = &xv2.data[b * in];
            const double* gyrow = &gy.data[b * out];
            for (std::size_t o = 0; o < out; ++o) {
                const double go = gyrow[o];
                if (go == 0.0) continue;
                double* gwrow = &weight.grad.data[o * in];
                if (!masked) {
                    for (std::size_t i = 0; i < in; ++i) {
                        gwrow[i] += go * xrow[i];
                    }
                } else {
                    const std::uint8_t* krow = &mask.keep[(o / mask.block_rows) * in];
                    for (std::size_t i = 0; i < in; ++i) {
                        if (krow[i]) gwrow[i] += go * xrow[i];
                    }
                }
            }
        }
        // db[o] += sum_b gy[b,o]
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < out; ++o) {
                bias.grad.data[o] += gy.at(b, o);
            }
        }
        // dx[b,i] += sum_o gy[b,o] * (W (.) mask)[o,i]
        for (std::size_t b = 0; b < batch; ++b) {
            double* gxrow = &gx.data[b * in];
            for (std::size_t o = 0; o < out; ++o) {
                const double go = gy.at(b, o);
                if (go == 0.0) continue;
                const double* wrow = &weight.value.data[o * in];
                if (!masked) {
                    for (std::size_t i = 0; i < in; ++i) gxrow[i] += go * wrow[i];
                } else {
                    const std::uint8_t* krow = &mask.keep[(o / mask.block_rows) * in];
                    for (std::size_t i = 0; i < in; ++i) {
                        if (krow[i]) gxrow[i] += go * wrow[i];
                    }
                }
            }
        }
        weight.grad_fresh = true;
        bias.grad_fresh = true;
    };
    return id;
}

Graph::NodeId Graph::relu(NodeId x) {
    const Tensor& xv = nodes_[x].value;
    Tensor y = xv;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    NodeId id = add_node(std::move(y));
    nodes_[id].back = [id, x](Graph& g) {
        const Tensor& gy = g.nodes_[id].grad;
        const Tensor& xv2 = g.nodes_[x].value;
        Tensor& gx = g.nodes_[x].grad;
        for (std::size_t i = 0; i < gx.numel(); ++i) {
            if (xv2.data[i] > 0.0) gx.data[i] += gy.data[i];
        }
    };
    return id;
}

Graph::NodeId Graph::dropout(NodeId x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ValueError("dropout rate outside [0,1): " + format_double(rate));
    }
    if (rate == 0.0) return x;

    const Tensor& xv = nodes_[x].value;
    const double scale = 1.0 / (1.0 - rate);
    std::vector<std::uint8_t> keep(xv.numel());
    Tensor y = xv;
    for (std::size_t i = 0; i < y.numel(); ++i) {
        keep[i] = rng.uniform01() >= rate ? 1 : 0;
        y.data[i] = keep[i] ? y.data[i] * scale : 0.0;
    }
    NodeId id = add_node(std::move(y));
    nodes_[id].back = [id, x, keep = std::move(keep), scale](Graph& g) {
        const Tensor& gy = g.nodes_[id].grad;
        Tensor& gx = g.nodes_[x].grad;
        for (std::size_t i = 0; i < gx.numel(); ++i) {
            if (keep[i]) gx.data[i] += gy.data[i] * scale;
        }
    };
    return id;
}

Graph::NodeId Graph::softmax_cross_entropy(NodeId logits, const std::vector<int>& labels) {
    const Tensor& z = nodes_[logits].value;
    const std::size_t batch = z.rows();
    const std::size_t classes = z.cols();
    if (batch == 0) throw ValueError("cross entropy on empty batch");
    if (labels.size() != batch) {
        throw DimensionError("labels size " + std::to_string(labels.size()) + " vs batch " +
                             std::to_string(batch));
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes) {
            throw ValueError("label " + std::to_string(l) + " outside [0," + std::to_string(classes) + ")");
        }
    }
    check_finite(z, "cross entropy logits");

    Tensor probs = Tensor::zeros({batch, classes});
    Tensor log_probs = Tensor::zeros({batch, classes});
    softmax_rows(z, 1.0, probs, &log_probs);
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        total -= log_probs.at(b, static_cast<std::size_t>(labels[b]));
    }
    Tensor loss({1}, {total / static_cast<double>(batch)});

    NodeId id = add_node(std::move(loss));
    nodes_[id].back = [id, logits, labels, probs = std::move(probs), batch, classes](Graph& g) {
        const double gl = g.nodes_[id].grad.data[0];
        if (gl == 0.0) return;
        Tensor& gz = g.nodes_[logits].grad;
        const double inv_batch = 1.0 / static_cast<double>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < classes; ++c) {
                double d = probs.at(b, c);
                if (c == static_cast<std::size_t>(labels[b])) d -= 1.0;
                gz.at(b, c) += gl * d * inv_batch;
            }
        }
    };
    return id;
}

Graph::NodeId Graph::kl_distillation(NodeId student_logits, const Tensor& teacher_logits,
                                     double temperature) {
    if (temperature <= 0.0) {
        throw ValueError("distillation temperature must be positive");
    }
    const Tensor& z = nodes_[student_logits].value;
    check_same_shape(z, teacher_logits, "kl_distillation");
    const std::size_t batch = z.rows();
    const std::size_t classes = z.cols();
    if (batch == 0) throw ValueError("distillation on empty batch");
    check_finite(z, "student logits");
    check_finite(teacher_logits, "teacher logits");

    const double inv_t = 1.0 / temperature;
    Tensor p_teacher = Tensor::zeros({batch, classes});
    Tensor logp_teacher = Tensor::zeros({batch, classes});
    Tensor p_student = Tensor::zeros({batch, classes});
    Tensor logp_student = Tensor::zeros({batch, classes});
    softmax_rows(teacher_logits, inv_t, p_teacher, &logp_teacher);
    softmax_rows(z, inv_t, p_student, &logp_student);

    double total = 0.0;
    for (std::size_t i = 0; i < p_teacher.numel(); ++i) {
        // p_teacher underflowing to 0 contributes 0; log stays finite.
        total += p_teacher.data[i] * (logp_teacher.data[i] - logp_student.data[i]);
    }
    const double t2 = temperature * temperature;
    Tensor loss({1}, {t2 * total / static_cast<double>(batch)});

    NodeId id = add_node(std::move(loss));
    nodes_[id].back = [id, student_logits, p_teacher = std::move(p_teacher),
                       p_student = std::move(p_student), temperature, batch](Graph& g) {
        const double gl = g.nodes_[id].grad.data[0];
        if (gl == 0.0) return;
        Tensor& gz = g.nodes_[student_logits].grad;
        const double coeff = gl * temperature / static_cast<double>(batch);
        for (std::size_t i = 0; i < gz.numel(); ++i) {
            gz.data[i] += coeff * (p_student.data[i] - p_teacher.data[i]);
        }
    };
    return id;
}

Graph::NodeId Graph::weighted_sum(const std::vector<std::pair<NodeId, double>>& terms) {
    double total = 0.0;
    for (const auto& [node, coeff] : terms) {
        if (nodes_[node].value.numel() != 1) {
            throw DimensionError("weighted_sum expects scalar nodes");
        }
        total += coeff * nodes_[node].value.data[0];
    }
    NodeId id = add_node(Tensor({1}, {total}));
    nodes_[id].back = [id, terms](Graph& g) {
        const double gl = g.nodes_[id].grad.data[0];
        for (const auto& [node, coeff] : terms) {
            g.nodes_[node].grad.data[0] += gl * coeff;
        }
    };
    return id;
}

double Graph::scalar(NodeId id) const {
    const Tensor& v = nodes_[id].value;
    if (v.numel() != 1) throw DimensionError("scalar() on tensor " + v.shape_str());
    return v.data[0];
}

void Graph::backward(NodeId root, double seed) {
    if (backward_done_) {
        throw StateError("backward already ran on this graph");
    }
    if (nodes_[root].value.numel() != 1) {
        throw DimensionError("backward root must be scalar");
    }
    backward_done_ = true;
    nodes_[root].grad.data[0] = seed;
    for (std::size_t i = root + 1; i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

} // namespace ospn
