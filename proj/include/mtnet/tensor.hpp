#pragma once
// Reverse-mode differentiable tensor. Values are stored densely in row-major
// order; the graph is held through shared parent pointers and freed when the
// last output goes out of scope. Instantiated with float for training and
// inference and with double for the finite-difference check mode.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mtnet {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto e : s) {
        if (e < 0) throw std::runtime_error("tensor: negative extent");
        n *= e;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string r = "[";
    for (size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
    return r + "]";
}

// Debug-mode NaN/Inf assertion, toggled globally. Off by default for speed;
// tests and the training loop turn it on.
inline bool& debug_finite_checks() {
    static bool enabled = false;
    return enabled;
}

template <class T>
struct Node {
    Shape shape;
    std::vector<T> val;
    std::vector<T> grad;  // allocated lazily during backward
    bool requires_grad = false;
    bool backward_done = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    // Captures parents by shared_ptr but its own node only by raw pointer;
    // an owning self-capture would cycle and leak every graph.
    std::function<void()> backward_fn;

    std::int64_t numel() const { return static_cast<std::int64_t>(val.size()); }
    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), T(0));
    }
};

template <class T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

    static Tensor zeros(Shape shape) { return full(std::move(shape), T(0)); }

    static Tensor full(Shape shape, T value) {
        auto n = std::make_shared<Node<T>>();
        n->val.assign(shape_numel(shape), value);
        n->shape = std::move(shape);
        return Tensor(std::move(n));
    }

    static Tensor from(Shape shape, std::vector<T> data) {
        if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
            throw std::runtime_error("tensor: data length " + std::to_string(data.size()) +
                                     " does not match shape " + shape_str(shape));
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->val = std::move(data);
        return Tensor(std::move(n));
    }

    static Tensor scalar(T value) { return from({}, {value}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->numel(); }
    std::int64_t dim(int i) const { return node_->shape.at(i); }
    int rank() const { return static_cast<int>(node_->shape.size()); }

    T* data() { return node_->val.data(); }
    const T* data() const { return node_->val.data(); }
    std::vector<T>& values() { return node_->val; }
    const std::vector<T>& values() const { return node_->val; }

    T item() const {
        if (numel() != 1) throw std::runtime_error("tensor: item() on non-scalar");
        return node_->val[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool rg = true) {
        node_->requires_grad = rg;
        return *this;
    }

    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad() { node_->grad.assign(node_->val.size(), T(0)); }

    // Value copy detached from the graph.
    Tensor detach() const {
        auto n = std::make_shared<Node<T>>();
        n->shape = node_->shape;
        n->val = node_->val;
        return Tensor(std::move(n));
    }

    std::shared_ptr<Node<T>>& node() { return node_; }
    const std::shared_ptr<Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <class T>
void check_finite(const Node<T>& n, const char* op) {
    if (!debug_finite_checks()) return;
    for (T v : n.val)
        if (!std::isfinite(static_cast<double>(v)))
            throw std::runtime_error(std::string("non-finite value produced by op '") + op + "'");
}

template <class T>
std::shared_ptr<Node<T>> make_node(Shape shape, std::vector<std::shared_ptr<Node<T>>> parents) {
    auto n = std::make_shared<Node<T>>();
    n->val.assign(shape_numel(shape), T(0));
    n->shape = std::move(shape);
    for (auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    n->parents = std::move(parents);
    return n;
}

}  // namespace detail

// Populates grads of every requires_grad node reachable from `loss`.
// loss must be scalar; running it twice on the same root is an error.
template <class T>
void backward(Tensor<T>& loss) {
    auto root = loss.node();
    if (!root) throw std::runtime_error("backward: undefined tensor");
    if (root->numel() != 1) throw std::runtime_error("backward: loss must be scalar");
    if (root->backward_done) throw std::runtime_error("backward: already run on this graph; reset first");
    root->backward_done = true;

    // Iterative post-order DFS; reverse gives a valid reverse-topological order.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node<T>* p = n->parents[idx++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->requires_grad && n->backward_fn) {
            n->ensure_grad();
            n->backward_fn();
        }
    }
}

}  // namespace mtnet
