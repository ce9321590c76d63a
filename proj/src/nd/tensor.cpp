#include "ldg/nd/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace ldg::nd {

namespace {

std::atomic<NodeId> next_id{1};
thread_local bool grad_mode = true;

NodePtr new_node(OpKind kind, Shape shape, std::vector<double> value, bool requires_grad) {
    if (shape_numel(shape) != value.size()) {
        throw ShapeError("value count " + std::to_string(value.size()) + " does not match shape " +
                         shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->id = next_id.fetch_add(1, std::memory_order_relaxed);
    node->kind = kind;
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return node;
}

void check_finite(OpKind kind, const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NonFiniteError(std::string("non-finite value produced by ") +
                                 std::string(to_string(kind)));
        }
    }
}

const Node& checked(const NodePtr& n) {
    if (!n) throw GraphError("use of undefined tensor");
    return *n;
}

}  // namespace

std::string_view to_string(OpKind kind) {
    switch (kind) {
        case OpKind::leaf: return "leaf";
        case OpKind::add: return "add";
        case OpKind::mul: return "mul";
        case OpKind::scale: return "scale";
        case OpKind::matmul: return "matmul";
        case OpKind::transpose: return "transpose";
        case OpKind::linear: return "linear";
        case OpKind::conv3d: return "conv3d";
        case OpKind::maxpool3d: return "maxpool3d";
        case OpKind::batchnorm3d: return "batchnorm3d";
        case OpKind::relu: return "relu";
        case OpKind::log: return "log";
        case OpKind::exp: return "exp";
        case OpKind::layernorm: return "layernorm";
        case OpKind::softmax: return "softmax";
        case OpKind::log_softmax: return "log_softmax";
        case OpKind::logsumexp: return "logsumexp";
        case OpKind::embedding: return "embedding";
        case OpKind::attention: return "attention";
        case OpKind::l2_normalize: return "l2_normalize";
        case OpKind::concat: return "concat";
        case OpKind::reshape: return "reshape";
        case OpKind::mean: return "mean";
        case OpKind::sum: return "sum";
    }
    return "unknown";
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void Node::accumulate(std::span<const double> g) {
    auto& buf = grad_buffer();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

std::vector<double>& Node::grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> v(shape_numel(shape), value);
    return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    check_finite(OpKind::leaf, values);
    return Tensor(new_node(OpKind::leaf, std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

NodeId Tensor::id() const { return checked(node_).id; }
OpKind Tensor::kind() const { return checked(node_).kind; }
const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw ShapeError("axis out of range for shape " + shape_str(s));
    return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).value.size(); }
bool Tensor::requires_grad() const { return checked(node_).requires_grad; }
bool Tensor::is_leaf() const { return checked(node_).kind == OpKind::leaf; }
std::span<const double> Tensor::values() const { return checked(node_).value; }

std::span<double> Tensor::mutable_values() {
    checked(node_);
    if (node_->kind != OpKind::leaf) throw GraphError("only leaf tensors may be modified");
    return node_->value;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

std::span<const double> Tensor::grad() const { return checked(node_).grad; }
bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }
void Tensor::zero_grad() { checked(node_); node_->grad.clear(); }

Tensor Tensor::detach() const {
    const auto& n = checked(node_);
    return Tensor(new_node(OpKind::leaf, n.shape, n.value, false));
}

NoGradGuard::NoGradGuard() : previous_(grad_mode) { grad_mode = false; }
NoGradGuard::~NoGradGuard() { grad_mode = previous_; }
bool grad_enabled() { return grad_mode; }

Tensor make_result(OpKind kind, Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   BackwardFn fn) {
    check_finite(kind, value);
    bool record = false;
    if (grad_mode) {
        for (const auto& t : inputs) record = record || t.requires_grad();
    }
    auto node = new_node(kind, std::move(shape), std::move(value), record);
    if (record) {
        node->inputs.reserve(inputs.size());
        for (const auto& t : inputs) node->inputs.push_back(t.node());
        node->backward = std::move(fn);
    }
    return Tensor(std::move(node));
}

namespace {

std::vector<Node*> reachable(const NodePtr& root) {
    std::vector<Node*> out;
    std::unordered_set<const Node*> seen;
    std::vector<Node*> stack{root.get()};
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        out.push_back(n);
        for (const auto& in : n->inputs) {
            if (in->requires_grad) stack.push_back(in.get());
        }
    }
    // Ids are issued at creation, so ascending id is a topological order.
    std::sort(out.begin(), out.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
    return out;
}

}  // namespace

void backward(const Tensor& loss) {
    if (!loss.defined()) throw GraphError("backward on undefined tensor");
    if (loss.numel() != 1) throw GraphError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    if (!loss.requires_grad()) throw GraphError("loss is detached from any parameter");
    const auto& root = loss.node();
    if (root->consumed) throw GraphError("backward already ran through this graph; rebuild it first");

    auto order = reachable(root);
    for (const Node* n : order) {
        if (n->consumed) throw GraphError("backward already ran through part of this graph");
    }
    root->accumulate(std::vector<double>{1.0});
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->kind == OpKind::leaf) continue;
        if (!n->grad.empty() && n->backward) n->backward(*n);
        n->backward = nullptr;
        n->consumed = true;
    }
}

std::vector<GraphEntry> trace(const Tensor& root) {
    std::vector<GraphEntry> entries;
    for (const Node* n : reachable(root.node())) {
        if (n->kind == OpKind::leaf) continue;
        GraphEntry e{n->kind, {}, n->id};
        for (const auto& in : n->inputs) e.inputs.push_back(in->id);
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace ldg::nd
