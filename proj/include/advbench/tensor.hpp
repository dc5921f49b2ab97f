#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "advbench/common.hpp"

namespace advbench {

struct TensorImpl;

// One recorded operation of the computation graph: parent links plus a
// closure that maps the output gradient onto the parents' gradients.
struct Node {
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(const TensorImpl& out)> backprop;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;  // row-major, product(shape) == data.size()
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad = false;
    std::shared_ptr<Node> node;  // set iff produced by a recorded op

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

// Value-semantics handle over shared storage. Copies alias; use clone() for a
// deep copy. Tensors with requires_grad=false are immutable by convention
// once built and safe to share across threads.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return filled(std::move(shape), 0.0, requires_grad);
    }

    static Tensor filled(Shape shape, double value, bool requires_grad = false) {
        auto impl = std::make_shared<TensorImpl>();
        impl->data.assign(static_cast<std::size_t>(numel(shape)), value);
        impl->shape = std::move(shape);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor from_data(Shape shape, std::vector<double> data,
                            bool requires_grad = false) {
        if (static_cast<std::int64_t>(data.size()) != numel(shape))
            fail("tensor: data size ", data.size(), " does not match shape ",
                 shape_str(shape));
        auto impl = std::make_shared<TensorImpl>();
        impl->shape = std::move(shape);
        impl->data = std::move(data);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::int64_t size() const { return static_cast<std::int64_t>(impl_->data.size()); }
    std::vector<double>& data() { return impl_->data; }
    const std::vector<double>& data() const { return impl_->data; }
    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    std::vector<double>& grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    const std::vector<double>& grad() const {
        check(has_grad(), "tensor: gradient not populated");
        return impl_->grad;
    }
    void zero_grad() {
        if (impl_ && !impl_->grad.empty())
            std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }

    double item() const {
        check(size() == 1, "tensor: item() on non-scalar " + shape_str(shape()));
        return impl_->data[0];
    }

    Tensor clone() const {
        auto impl = std::make_shared<TensorImpl>();
        impl->shape = impl_->shape;
        impl->data = impl_->data;
        impl->requires_grad = impl_->requires_grad;
        return Tensor(std::move(impl));
    }

    // Same storage, new shape. Graph-transparent: gradient flows through
    // unchanged (flat layout is shared).
    Tensor reshaped(Shape new_shape) const;

    std::shared_ptr<TensorImpl> impl() const { return impl_; }
    TensorImpl* raw() const { return impl_.get(); }

    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

namespace detail {

// Grad recording is on by default; NoGradGuard switches it off for pure
// inference passes.
inline bool& grad_enabled_flag() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_enabled_flag()) {
        detail::grad_enabled_flag() = false;
    }
    ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Helper used by every op: build the result tensor and, when recording
// applies, attach the node with its parents and local-gradient closure.
inline Tensor make_op_result(const char* op, Shape shape, std::vector<double> data,
                             std::vector<Tensor> inputs,
                             std::function<void(const TensorImpl&)> backprop) {
    bool needs_grad = false;
    if (grad_enabled()) {
        for (const auto& t : inputs)
            if (t.requires_grad()) needs_grad = true;
    }
    Tensor out = Tensor::from_data(std::move(shape), std::move(data), needs_grad);
    if (needs_grad) {
        auto node = std::make_shared<Node>();
        node->op = op;
        node->parents.reserve(inputs.size());
        for (const auto& t : inputs) node->parents.push_back(t.impl());
        node->backprop = std::move(backprop);
        out.impl()->node = std::move(node);
    }
    return out;
}

inline Tensor Tensor::reshaped(Shape new_shape) const {
    if (numel(new_shape) != size())
        fail("reshape: cannot view ", shape_str(shape()), " as ",
             shape_str(new_shape));
    const Tensor& self = *this;
    return make_op_result("reshape", std::move(new_shape),
                          impl_->data, {self},
                          [src = impl_](const TensorImpl& out) {
                              src->ensure_grad();
                              for (std::size_t i = 0; i < out.grad.size(); ++i)
                                  src->grad[i] += out.grad[i];
                          });
}

// Reverse-mode sweep from a scalar loss. Visits each recorded node exactly
// once, in reverse topological order; leaf gradients accumulate, so zero them
// between steps.
inline void backward(const Tensor& loss) {
    check(loss.defined() && loss.size() == 1, "backward: loss must be scalar");
    if (!loss.impl()->node)
        fail("backward: tensor was not produced on the active graph");

    // Iterative post-order DFS over the implicit graph.
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    stack.emplace_back(loss.raw(), 0);
    visited.insert(loss.raw());
    while (!stack.empty()) {
        auto& [impl, next_child] = stack.back();
        if (!impl->node || next_child >= impl->node->parents.size()) {
            order.push_back(impl);
            stack.pop_back();
            continue;
        }
        TensorImpl* child = impl->node->parents[next_child++].get();
        if (child->node && !visited.count(child)) {
            visited.insert(child);
            stack.emplace_back(child, 0);
        }
    }

    loss.impl()->ensure_grad();
    loss.impl()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* impl = *it;
        if (impl->node && impl->node->backprop) impl->node->backprop(*impl);
    }
}

}  // namespace advbench
