#include "textsr/core/graph.hpp"

namespace textsr {

void axpy(real* y, const real* x, int64_t n) {
    // an "omp parallel for if(...)" would still enter the runtime on the
    // millions of tiny recurrence-gradient adds, so branch explicitly
    if (n > 65536) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) y[i] += x[i];
    } else {
        for (int64_t i = 0; i < n; ++i) y[i] += x[i];
    }
}

Val Graph::leaf(Tensor v, bool needs_grad) {
    nodes_.push_back(Node{});
    Node& nd = nodes_.back();
    nd.val = std::move(v);
    nd.needs_grad = needs_grad;
    nd.keep = true;
    return Val{this, size() - 1};
}

Val Graph::param(Param& p) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return Val{this, it->second};
    Val v = leaf(p.value, training_ && p.trainable);
    param_ids_[&p] = v.id;
    return v;
}

int Graph::add_node(Tensor value, std::vector<int> parents, BackFn back) {
    bool needs = false;
    for (int pid : parents) needs = needs || nodes_[pid].needs_grad;
    nodes_.push_back(Node{});
    Node& nd = nodes_.back();
    nd.val = std::move(value);
    nd.parents = std::move(parents);
    nd.needs_grad = needs;
    if (needs) nd.back = std::move(back);
    return size() - 1;
}

void Graph::accumulate_grad(int id, Tensor contribution, bool may_steal) {
    Node& nd = node(id);
    if (!nd.needs_grad) return;
    if (contribution.numel() != nd.val.numel())
        throw std::invalid_argument("Graph::accumulate_grad: size mismatch");
    if (nd.grad.empty()) {
        if (!may_steal) contribution = contribution.clone();
        if (contribution.same_shape(nd.val))
            nd.grad = std::move(contribution);
        else
            nd.grad = contribution.reshaped(nd.val.shape());
        return;
    }
    axpy(nd.grad.data(), contribution.data(), nd.grad.numel());
}

Tensor& Graph::ensure_grad(int id) {
    Node& nd = node(id);
    if (nd.grad.empty()) nd.grad = Tensor(nd.val.shape(), 0.0);
    return nd.grad;
}

void Graph::backward(Val loss) {
    if (loss.g != this) throw std::invalid_argument("Graph::backward: foreign value");
    Node& top = node(loss.id);
    if (top.val.numel() != 1)
        throw std::invalid_argument("Graph::backward: loss must be scalar");
    if (!top.needs_grad) return;
    top.grad = Tensor(top.val.shape(), 1.0);
    for (int id = loss.id; id >= 0; --id) {
        Node& nd = nodes_[id];
        if (!nd.grad.empty() && nd.back) nd.back(*this);
        if (!nd.keep && id != loss.id) {
            nd.val.release();
            nd.grad.release();
        }
        nd.back = nullptr;
    }
}

const Tensor* Graph::param_grad(const Param& p) const {
    auto it = param_ids_.find(&p);
    if (it == param_ids_.end()) return nullptr;
    const Tensor& g = nodes_[it->second].grad;
    return g.empty() ? nullptr : &g;
}

}  // namespace textsr
