#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "treegrad/numerics.hpp"
#include "treegrad/treebank.hpp"

namespace treegrad {

enum class ModelKind { rnn, rlstm };

std::string_view to_string(ModelKind kind) noexcept;
/// Accepts "rnn" or "rlstm". Throws std::invalid_argument otherwise.
ModelKind parse_model_kind(std::string_view text);

inline constexpr std::size_t kDefaultDim = 50;
inline constexpr std::size_t kVocabSize = kMaxToken + 1;
inline constexpr double kInitRange = 1e-4;

/// One-layer feed-forward composer: parent = tanh(W [left; right] + b), W is n×2n.
struct RnnParams {
    Matrix W;
    Vector b;
    friend bool operator==(const RnnParams&, const RnnParams&) = default;
};

/// Affine gate input from the two children: left·r1 + right·r2 + bias.
struct Gate {
    Matrix left;
    Matrix right;
    Vector bias;
    friend bool operator==(const Gate&, const Gate&) = default;
};

/// Binary tree-LSTM with one forget gate per child and no peepholes.
struct RlstmParams {
    Gate input;
    Gate forget_left;
    Gate forget_right;
    Gate output;
    Gate candidate;
    friend bool operator==(const RlstmParams&, const RlstmParams&) = default;
};

/// Softmax layer over the root representation (10 classes).
struct Classifier {
    Matrix weights;
    Vector bias;
    friend bool operator==(const Classifier&, const Classifier&) = default;
};

using ComposerParams = std::variant<RnnParams, RlstmParams>;

struct NodeState {
    Vector rep;
    Vector mem;  // zero for every RNN node and every leaf
};

/// A mutable view of one parameter block, used for optimizer, checkpoint and
/// gradient-check iteration.
template <typename T>
struct BasicBlockRef {
    std::string name;
    std::size_t rows;
    std::size_t cols;
    std::span<T> values;
};
using BlockRef = BasicBlockRef<double>;
using ConstBlockRef = BasicBlockRef<const double>;

/// Embeddings (10001 × n), composer and classifier.
class Model {
public:
    /// All-zero parameters of the right shapes.
    static Model zeros(ModelKind kind, std::size_t dim);
    /// Every weight, including the embeddings, uniform on [-1e-4, 1e-4); biases zero.
    static Model init(ModelKind kind, std::size_t dim, std::uint64_t seed);

    ModelKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }

    Matrix embeddings;
    ComposerParams composer;
    Classifier classifier;
    /// Seeds that produced this model, outermost first.
    std::vector<std::uint64_t> seed_lineage;

    RnnParams& rnn() { return std::get<RnnParams>(composer); }
    const RnnParams& rnn() const { return std::get<RnnParams>(composer); }
    RlstmParams& rlstm() { return std::get<RlstmParams>(composer); }
    const RlstmParams& rlstm() const { return std::get<RlstmParams>(composer); }

    /// Visits every block in the fixed checkpoint order: embeddings,
    /// composer blocks, classifier.weights, classifier.bias.
    std::vector<BlockRef> blocks();
    std::vector<ConstBlockRef> blocks() const;

    friend bool operator==(const Model&, const Model&) = default;

private:
    Model(ModelKind kind, std::size_t dim);

    ModelKind kind_ = ModelKind::rnn;
    std::size_t dim_ = 0;
};

/// Composer blocks in checkpoint order ("W", "b" or "input.left", ...).
std::vector<BlockRef> composer_blocks(ComposerParams& p);
std::vector<ConstBlockRef> composer_blocks(const ComposerParams& p);

/// Gradient of J for one example or a summed minibatch. Dense for composer and
/// classifier; embeddings hold only the rows of tokens that occurred.
struct Gradients {
    ComposerParams composer;
    Classifier classifier;
    std::map<Token, Vector> embeddings;

    static Gradients zeros_like(const Model& model);

    /// Dense blocks (composer then classifier), in the model's block order.
    std::vector<BlockRef> dense_blocks();
    std::vector<ConstBlockRef> dense_blocks() const;
    /// this += other, block by block and row by row.
    void add(const Gradients& other);
};

NodeState rnn_compose(const NodeState& left, const NodeState& right, const RnnParams& p);
NodeState rlstm_compose(const NodeState& left, const NodeState& right, const RlstmParams& p);

/// Cached forward pass over one tree. Nodes share the tree's post-order indexing.
struct ForwardTrace {
    struct GateValues {
        Vector input;
        Vector forget_left;
        Vector forget_right;
        Vector output;
        Vector candidate;
        Vector tanh_mem;
    };

    ModelKind kind = ModelKind::rnn;
    std::size_t dim = 0;
    std::vector<BinaryTree::Node> topology;
    std::vector<NodeState> states;
    std::vector<GateValues> gates;  // RLSTM only, empty entries at leaves

    Vector scores;
    Vector distribution;
    std::optional<int> label;
    double loss = 0.0;

    /// Filled by backward(): ∂J/∂rep and ∂J/∂mem per node.
    std::vector<Vector> err_rep;
    std::vector<Vector> err_mem;

    std::size_t root() const noexcept { return states.size() - 1; }
    bool has_errors() const noexcept { return !err_rep.empty(); }
};

/// Bottom-up pass; computes J = -log p(label) when a label is supplied.
ForwardTrace forward(const BinaryTree& tree, const Model& model,
                     std::optional<int> label = std::nullopt);

/// Backpropagation through structure. Fills trace.err_rep / err_mem and
/// returns the gradient of J. Throws std::invalid_argument if the trace does
/// not belong to a model of this kind and size.
Gradients backward(ForwardTrace& trace, int label, const Model& model);

/// Arg-max class; ties go to the lowest index.
int predict(const ForwardTrace& trace);
int predict(const Vector& distribution);

// Checkpoints -----------------------------------------------------------------
// Layout documented in docs/checkpoint-format.md.

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(std::string_view bytes);

}  // namespace treegrad
