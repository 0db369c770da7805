#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "textsr/core/tensor.hpp"

namespace textsr {

class Rng;

// A trainable weight. Graphs reference Param values by aliasing tensors,
// so the optimizer sees gradients through Graph::param_grads().
struct Param {
    Tensor value;
    bool trainable = true;
};

class Graph;

// Lightweight handle to a node in a Graph tape.
struct Val {
    Graph* g = nullptr;
    int id = -1;
    bool ok() const { return g != nullptr && id >= 0; }
};

// Define-by-run reverse-mode tape. Nodes are created in topological order;
// backward walks ids in reverse and frees value/grad buffers as soon as a
// node has been processed, which keeps peak memory near the forward cost.
class Graph {
public:
    using BackFn = std::function<void(Graph&)>;

    explicit Graph(bool training = false) : training_(training) {}

    bool training() const { return training_; }

    // RNG for dropout masks; must be set when training with dropout > 0.
    Rng* rng = nullptr;

    Val leaf(Tensor v, bool needs_grad = false);
    Val param(Param& p);

    int add_node(Tensor value, std::vector<int> parents, BackFn back);

    Tensor& val(Val v) { return node(v.id).val; }
    const Tensor& val(Val v) const { return nodes_[v.id].val; }
    Tensor& val(int id) { return node(id).val; }
    Tensor& grad(Val v) { return node(v.id).grad; }
    Tensor& grad(int id) { return node(id).grad; }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }

    // Adds `contribution` into the node's grad. With may_steal, an empty
    // grad takes over the buffer; a stolen buffer must have no other live
    // owner that could be mutated later (pass may_steal=false when handing
    // the same tensor to a second parent).
    void accumulate_grad(int id, Tensor contribution, bool may_steal = true);

    // Zero-initialized grad buffer for in-place accumulation (region adds,
    // kernel accumulate modes).
    Tensor& ensure_grad(int id);

    void backward(Val loss);

    // Gradient accumulated for a param in this graph; empty if none.
    const Tensor* param_grad(const Param& p) const;

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::vector<int> parents;
        BackFn back;
        bool needs_grad = false;
        bool keep = false;  // leaves and params: buffers survive backward
    };

    Node& node(int id) {
        if (id < 0 || id >= size()) throw std::out_of_range("Graph: bad node id");
        return nodes_[id];
    }

    bool training_;
    std::vector<Node> nodes_;
    std::unordered_map<const Param*, int> param_ids_;
};

// y += x elementwise over n entries.
void axpy(real* y, const real* x, int64_t n);

}  // namespace textsr
