#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "useg/rng.hpp"
#include "useg/tensor.hpp"

namespace useg {

// One value in the computation graph. `grad` is allocated only for tracked
// nodes (parameters, and anything computed from them while a tape records).
template <typename T>
struct NodeT {
    TensorT<T> val;
    TensorT<T> grad;
    bool tracked = false;

    TensorT<T>& grad_ref() {
        if (grad.numel() != val.numel()) grad = TensorT<T>(val.shape());
        return grad;
    }
};

// Records executed differentiable operations in forward order; backward
// replays them in exact reverse order, which is a reverse topological order
// because every operation's inputs exist before it runs.
template <typename T>
class Tape {
public:
    void record(std::function<void()> backward_step) { steps_.push_back(std::move(backward_step)); }

    size_t size() const { return steps_.size(); }
    bool consumed() const { return consumed_; }

    void run_backward() {
        if (consumed_) throw NumericError("backward called twice on the same tape");
        consumed_ = true;
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> steps_;
    bool consumed_ = false;
};

// Shared handle to a node. Copying a Var aliases the same storage.
template <typename T>
class Var {
public:
    Var() = default;

    explicit Var(std::shared_ptr<NodeT<T>> n) : node_(std::move(n)) {}

    // Constant input: gradient never flows into it.
    static Var constant(TensorT<T> v) {
        auto n = std::make_shared<NodeT<T>>();
        n->val = std::move(v);
        n->tracked = false;
        return Var(std::move(n));
    }

    // Tracked leaf: participates in backward (used for parameters and for
    // inputs under gradient checks).
    static Var leaf(TensorT<T> v) {
        auto n = std::make_shared<NodeT<T>>();
        n->val = std::move(v);
        n->tracked = true;
        n->grad_ref().fill(T(0));
        return Var(std::move(n));
    }

    bool defined() const { return node_ != nullptr; }
    bool tracked() const { return node_ && node_->tracked; }

    const TensorT<T>& val() const { return node_->val; }
    TensorT<T>& val() { return node_->val; }
    TensorT<T>& grad() { return node_->grad_ref(); }
    const Shape& shape() const { return node_->val.shape(); }

    std::shared_ptr<NodeT<T>> node() const { return node_; }

private:
    std::shared_ptr<NodeT<T>> node_;
};

// Learnable parameter: a named tracked node whose gradient persists across
// tapes so batch accumulation is a plain +=.
template <typename T>
struct ParamT {
    std::string name;
    std::shared_ptr<NodeT<T>> node;

    ParamT() = default;
    ParamT(std::string n, TensorT<T> value) : name(std::move(n)), node(std::make_shared<NodeT<T>>()) {
        node->val = std::move(value);
        node->tracked = true;
        node->grad_ref().fill(T(0));
    }

    TensorT<T>& value() { return node->val; }
    const TensorT<T>& value() const { return node->val; }
    TensorT<T>& grad() { return node->grad_ref(); }
    Var<T> var() const { return Var<T>(node); }
    size_t numel() const { return node->val.numel(); }

    void zero_grad() { node->grad_ref().fill(T(0)); }
};

// Seed the scalar loss gradient with 1 and propagate.
template <typename T>
void backward(const Var<T>& loss, Tape<T>& tape) {
    if (loss.val().numel() != 1) throw ShapeError("backward expects a scalar loss");
    if (!loss.tracked()) throw NumericError("loss does not depend on any tracked parameter");
    const_cast<Var<T>&>(loss).grad()[0] += T(1);
    tape.run_backward();
}

// Execution context threaded through layer forwards.
template <typename T>
struct CtxT {
    Tape<T>* tape = nullptr;  // nullptr: pure inference, nothing recorded
    bool training = false;    // dropout/batchnorm behavior
    Rng* rng = nullptr;       // required when training with dropout

    bool taping() const { return tape != nullptr; }
};

}  // namespace useg
