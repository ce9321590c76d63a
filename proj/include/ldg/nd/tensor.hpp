#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ldg::nd {

using Shape = std::vector<std::size_t>;
using NodeId = std::uint64_t;

enum class OpKind {
    leaf,
    add,
    mul,
    scale,
    matmul,
    transpose,
    linear,
    conv3d,
    maxpool3d,
    batchnorm3d,
    relu,
    log,
    exp,
    layernorm,
    softmax,
    log_softmax,
    logsumexp,
    embedding,
    attention,
    l2_normalize,
    concat,
    reshape,
    mean,
    sum,
};

std::string_view to_string(OpKind kind);

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GraphError : std::logic_error {
    using std::logic_error::logic_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node& self)>;

/// One vertex of the differentiation graph. Leaves own parameters and inputs;
/// interior nodes own the closure that routes their gradient to `inputs`.
struct Node {
    NodeId id = 0;
    OpKind kind = OpKind::leaf;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until a gradient arrives
    bool requires_grad = false;
    bool consumed = false;
    std::vector<NodePtr> inputs;
    BackwardFn backward;

    /// Adds `g` into this node's gradient buffer, allocating it on first use.
    void accumulate(std::span<const double> g);
    std::vector<double>& grad_buffer();
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    NodeId id() const;
    OpKind kind() const;
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    bool requires_grad() const;
    bool is_leaf() const;

    std::span<const double> values() const;
    /// Mutable view; only leaves may be written (optimizer updates, perturbation).
    std::span<double> mutable_values();
    double item() const;
    double operator[](std::size_t i) const { return values()[i]; }

    /// Empty span when no gradient has reached this tensor.
    std::span<const double> grad() const;
    bool has_grad() const;
    void zero_grad();

    /// A new leaf holding a copy of the values and no history.
    Tensor detach() const;

    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

/// While alive, operations on the current thread do not record history.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Builds an op result. Records `fn` when grad mode is on and any input
/// requires grad; throws NonFiniteError if `value` holds NaN or Inf.
Tensor make_result(OpKind kind, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn fn);

/// Accumulates dL/dleaf for every requires_grad leaf reachable from `loss`.
/// The graph is consumed: a second call through the same nodes throws.
void backward(const Tensor& loss);

struct GraphEntry {
    OpKind kind;
    std::vector<NodeId> inputs;
    NodeId output;
};

/// Primitive applications reachable from `root`, in topological order.
std::vector<GraphEntry> trace(const Tensor& root);

}  // namespace ldg::nd
