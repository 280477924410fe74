#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace crope {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
    os << "]";
    return os.str();
}

template <class T>
class Tensor;

// One node of the backward graph. `backward` pulls from this node's grad and
// accumulates into the parents' grads; it must not capture the owning tensor
// (that would create a shared_ptr cycle).
template <class T>
struct TensorImpl {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated on first use
    bool requires_grad = false;
    std::vector<Tensor<T>> parents;
    std::function<void(TensorImpl<T>&)> backward;

    bool is_leaf() const { return !backward; }

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T(0));
    }
};

// Dense real tensor participating in reverse-mode autodiff. Cheap to copy:
// a Tensor is a shared handle to its storage and graph node.
template <class T>
class Tensor {
  public:
    using Scalar = T;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        Tensor t;
        t.p_ = std::make_shared<TensorImpl<T>>();
        t.p_->shape = std::move(shape);
        t.p_->value.assign(shape_numel(t.p_->shape), T(0));
        t.p_->requires_grad = requires_grad;
        return t;
    }

    static Tensor full(Shape shape, T v, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& x : t.p_->value) x = v;
        return t;
    }

    static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size())
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not hold " +
                                        std::to_string(data.size()) + " values");
        Tensor t;
        t.p_ = std::make_shared<TensorImpl<T>>();
        t.p_->shape = std::move(shape);
        t.p_->value = std::move(data);
        t.p_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(T v, bool requires_grad = false) { return from({}, {v}, requires_grad); }

    bool defined() const { return static_cast<bool>(p_); }

    const Shape& shape() const { return p_->shape; }
    std::size_t numel() const { return p_->value.size(); }
    std::size_t rank() const { return p_->shape.size(); }
    std::size_t rows() const { return p_->shape.at(0); }
    std::size_t cols() const { return p_->shape.at(1); }

    std::vector<T>& value() { return p_->value; }
    const std::vector<T>& value() const { return p_->value; }
    std::vector<T>& grad() {
        p_->ensure_grad();
        return p_->grad;
    }
    bool has_grad() const { return !p_->grad.empty(); }
    bool requires_grad() const { return p_->requires_grad; }

    T item() const {
        if (numel() != 1) throw std::invalid_argument("item: tensor has shape " + shape_str(shape()));
        return p_->value[0];
    }

    T& at(std::size_t i, std::size_t j) { return p_->value[i * cols() + j]; }
    T at(std::size_t i, std::size_t j) const { return p_->value[i * cols() + j]; }

    void zero_grad() {
        if (!p_->grad.empty()) p_->grad.assign(p_->grad.size(), T(0));
    }

    TensorImpl<T>* impl() const { return p_.get(); }

    // Reverse pass from a scalar. Interior grads are recomputed from scratch on
    // every call while leaf grads accumulate, so calling backward twice doubles
    // every parameter gradient.
    void backward() {
        if (numel() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(shape()));
        std::vector<TensorImpl<T>*> order = topo_order();
        for (TensorImpl<T>* n : order) {
            if (!n->is_leaf()) {
                if (n->grad.empty())
                    n->ensure_grad();  // fresh buffers are already zero
                else
                    std::fill(n->grad.begin(), n->grad.end(), T(0));
            }
        }
        p_->ensure_grad();
        p_->grad[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if (!(*it)->is_leaf()) (*it)->backward(**it);
        }
    }

  private:
    // Post-order DFS, iterative: training graphs are shallow but wide.
    std::vector<TensorImpl<T>*> topo_order() const {
        std::vector<TensorImpl<T>*> order;
        std::unordered_set<TensorImpl<T>*> seen;
        std::vector<std::pair<TensorImpl<T>*, std::size_t>> stack;
        stack.emplace_back(p_.get(), 0);
        seen.insert(p_.get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                TensorImpl<T>* par = node->parents[next].impl();
                ++next;
                if (seen.insert(par).second) stack.emplace_back(par, 0);
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
        return order;
    }

    std::shared_ptr<TensorImpl<T>> p_;
};

// Named, trainable tensor; names are unique within a model.
template <class T>
struct Parameter {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
};

}  // namespace crope
