#include "phycine/ad/tape.hpp"

#include "phycine/common/error.hpp"

namespace phycine::ad {

double* GradStore::acquire(int node, int size) {
    auto& b = buf_[node];
    if (b.empty()) b.assign(size, 0.0);
    return b.data();
}

const std::vector<double>* GradStore::find(int node) const {
    if (node < 0 || node >= static_cast<int>(buf_.size())) return nullptr;
    if (buf_[node].empty()) return nullptr;
    return &buf_[node];
}

Tensor Tape::watch(const Tensor& value) {
    Tensor t = value.detached();
    t.tape = this;
    t.node = record(t.shape, BackwardFn{});  // leaves have no backward step
    return t;
}

int Tape::record(const std::vector<int>& out_shape, BackwardFn fn) {
    shapes_.push_back(out_shape);
    fns_.push_back(std::move(fn));
    return static_cast<int>(shapes_.size()) - 1;
}

void Tape::backward(const Tensor& loss) {
    if (loss.tape != this || loss.node < 0)
        raise(ErrorKind::Invariant, "backward: loss is not recorded on this tape");
    if (!loss.is_scalar())
        raise(ErrorKind::Shape, "backward: loss must be scalar, got " + shape_str(loss.shape));
    grads_.buf_.clear();
    grads_.buf_.resize(shapes_.size());
    grads_.acquire(loss.node, 1)[0] = 1.0;
    // Node ids are in execution order, so a reverse sweep visits every node
    // after all of its consumers. Nodes recorded after the loss are skipped.
    for (int i = loss.node; i >= 0; --i) {
        if (grads_.buf_[i].empty() || !fns_[i]) continue;
        fns_[i](grads_.buf_[i], grads_);
    }
    ran_backward_ = true;
}

Tensor Tape::grad(const Tensor& t) const {
    if (t.tape != this || t.node < 0)
        raise(ErrorKind::Invariant, "grad: tensor is not recorded on this tape");
    if (!ran_backward_) raise(ErrorKind::Invariant, "grad: backward() has not run");
    Tensor g = Tensor::zeros(shapes_[t.node]);
    if (const auto* b = grads_.find(t.node)) g.data = *b;
    return g;
}

}  // namespace phycine::ad
