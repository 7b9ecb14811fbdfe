#include "treegrad/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>

namespace treegrad {

std::string_view to_string(ModelKind kind) noexcept {
    return kind == ModelKind::rnn ? "rnn" : "rlstm";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "rnn") {
        return ModelKind::rnn;
    }
    if (text == "rlstm") {
        return ModelKind::rlstm;
    }
    throw std::invalid_argument("unknown model kind '" + std::string(text) +
                                "' (expected rnn or rlstm)");
}

namespace {

Gate zero_gate(std::size_t n) { return {Matrix(n, n), Matrix(n, n), Vector(n)}; }

ComposerParams zero_composer(ModelKind kind, std::size_t n) {
    if (kind == ModelKind::rnn) {
        return RnnParams{Matrix(n, 2 * n), Vector(n)};
    }
    return RlstmParams{zero_gate(n), zero_gate(n), zero_gate(n), zero_gate(n), zero_gate(n)};
}

Classifier zero_classifier(std::size_t n) {
    return {Matrix(kNumClasses, n), Vector(kNumClasses)};
}

template <typename M>
auto ref(std::string name, M& m) {
    using T = std::conditional_t<std::is_const_v<M>, const double, double>;
    if constexpr (std::is_same_v<std::remove_const_t<M>, Matrix>) {
        return BasicBlockRef<T>{std::move(name), m.rows(), m.cols(), m.values()};
    } else {
        return BasicBlockRef<T>{std::move(name), m.size(), 1, m.values()};
    }
}

template <typename Ref, typename G>
void append_gate(std::vector<Ref>& out, const std::string& name, G& g) {
    out.push_back(ref(name + ".left", g.left));
    out.push_back(ref(name + ".right", g.right));
    out.push_back(ref(name + ".bias", g.bias));
}

template <typename P>
auto composer_blocks_impl(P& p) {
    using R = std::conditional_t<std::is_const_v<P>, ConstBlockRef, BlockRef>;
    std::vector<R> out;
    if (auto* rnn = std::get_if<RnnParams>(&p)) {
        out.push_back(ref("W", rnn->W));
        out.push_back(ref("b", rnn->b));
    } else {
        auto& l = std::get<RlstmParams>(p);
        append_gate(out, "input", l.input);
        append_gate(out, "forget_left", l.forget_left);
        append_gate(out, "forget_right", l.forget_right);
        append_gate(out, "output", l.output);
        append_gate(out, "candidate", l.candidate);
    }
    return out;
}

template <typename M>
auto model_blocks(M& m) {
    auto composer = composer_blocks_impl(m.composer);
    decltype(composer) out;
    out.push_back(ref("embeddings", m.embeddings));
    for (auto& b : composer) {
        out.push_back(std::move(b));
    }
    out.push_back(ref("classifier.weights", m.classifier.weights));
    out.push_back(ref("classifier.bias", m.classifier.bias));
    return out;
}

template <typename G>
auto gradient_blocks(G& g) {
    auto out = composer_blocks_impl(g.composer);
    out.push_back(ref("classifier.weights", g.classifier.weights));
    out.push_back(ref("classifier.bias", g.classifier.bias));
    return out;
}

}  // namespace

Model::Model(ModelKind kind, std::size_t dim)
    : embeddings(kVocabSize, dim),
      composer(zero_composer(kind, dim)),
      classifier(zero_classifier(dim)),
      kind_(kind),
      dim_(dim) {}

Model Model::zeros(ModelKind kind, std::size_t dim) {
    if (dim == 0) {
        throw std::invalid_argument("model dimension must be at least 1");
    }
    return Model(kind, dim);
}

Model Model::init(ModelKind kind, std::size_t dim, std::uint64_t seed) {
    Model m = zeros(kind, dim);
    m.seed_lineage = {seed};
    SeededRng rng(seed);
    for (auto& block : m.blocks()) {
        const bool is_bias = block.name == "b" || block.name.ends_with(".bias");
        if (is_bias) {
            continue;
        }
        for (double& v : block.values) {
            v = rng.uniform_real(-kInitRange, kInitRange);
        }
    }
    return m;
}

std::vector<BlockRef> composer_blocks(ComposerParams& p) { return composer_blocks_impl(p); }
std::vector<ConstBlockRef> composer_blocks(const ComposerParams& p) {
    return composer_blocks_impl(p);
}

std::vector<BlockRef> Model::blocks() { return model_blocks(*this); }
std::vector<ConstBlockRef> Model::blocks() const { return model_blocks(*this); }

Gradients Gradients::zeros_like(const Model& model) {
    return {zero_composer(model.kind(), model.dim()), zero_classifier(model.dim()), {}};
}

std::vector<BlockRef> Gradients::dense_blocks() { return gradient_blocks(*this); }
std::vector<ConstBlockRef> Gradients::dense_blocks() const { return gradient_blocks(*this); }

void Gradients::add(const Gradients& other) {
    auto mine = dense_blocks();
    const auto theirs = other.dense_blocks();
    if (mine.size() != theirs.size()) {
        throw std::invalid_argument("Gradients::add: composer kinds differ");
    }
    for (std::size_t i = 0; i < mine.size(); ++i) {
        if (mine[i].values.size() != theirs[i].values.size()) {
            throw std::invalid_argument("Gradients::add: shape mismatch in " + mine[i].name);
        }
        kernels::add(mine[i].values, theirs[i].values);
    }
    for (const auto& [token, row] : other.embeddings) {
        auto [it, inserted] = embeddings.try_emplace(token, row);
        if (!inserted) {
            kernels::add(it->second.values(), row.values());
        }
    }
}

// Composition ------------------------------------------------------------------

namespace {

void check_children(const NodeState& a, const NodeState& b, std::size_t n) {
    if (a.rep.size() != n || b.rep.size() != n || a.mem.size() != n || b.mem.size() != n) {
        throw std::invalid_argument("compose: child states must have dimension " +
                                    std::to_string(n));
    }
}

// z = left·r1 + right·r2 + bias
void gate_preactivation(const Gate& g, const Vector& r1, const Vector& r2, Vector& z) {
    std::copy(g.bias.values().begin(), g.bias.values().end(), z.values().begin());
    kernels::gemv_acc(g.left, r1.data(), z.data());
    kernels::gemv_acc(g.right, r2.data(), z.data());
}

void sigmoid_inplace(Vector& v) {
    for (double& x : v.values()) {
        x = sigmoid(x);
    }
}

void tanh_inplace(Vector& v) {
    for (double& x : v.values()) {
        x = std::tanh(x);
    }
}

NodeState rnn_apply(const Vector& r1, const Vector& r2, const RnnParams& p) {
    const std::size_t n = p.b.size();
    NodeState out{p.b, Vector(n)};
    kernels::gemv_acc_block(p.W, 0, n, r1.data(), out.rep.data());
    kernels::gemv_acc_block(p.W, n, n, r2.data(), out.rep.data());
    tanh_inplace(out.rep);
    return out;
}

NodeState rlstm_apply(const NodeState& x, const NodeState& y, const RlstmParams& p,
                      ForwardTrace::GateValues& g) {
    const std::size_t n = p.input.bias.size();
    g.input = Vector(n);
    g.forget_left = Vector(n);
    g.forget_right = Vector(n);
    g.output = Vector(n);
    g.candidate = Vector(n);
    g.tanh_mem = Vector(n);
    gate_preactivation(p.input, x.rep, y.rep, g.input);
    gate_preactivation(p.forget_left, x.rep, y.rep, g.forget_left);
    gate_preactivation(p.forget_right, x.rep, y.rep, g.forget_right);
    gate_preactivation(p.output, x.rep, y.rep, g.output);
    gate_preactivation(p.candidate, x.rep, y.rep, g.candidate);
    sigmoid_inplace(g.input);
    sigmoid_inplace(g.forget_left);
    sigmoid_inplace(g.forget_right);
    sigmoid_inplace(g.output);
    tanh_inplace(g.candidate);

    NodeState out{Vector(n), Vector(n)};
    for (std::size_t k = 0; k < n; ++k) {
        const double c = g.forget_left[k] * x.mem[k] + g.forget_right[k] * y.mem[k] +
                         g.input[k] * g.candidate[k];
        out.mem[k] = c;
        g.tanh_mem[k] = std::tanh(c);
        out.rep[k] = g.output[k] * g.tanh_mem[k];
    }
    return out;
}

}  // namespace

NodeState rnn_compose(const NodeState& left, const NodeState& right, const RnnParams& p) {
    const std::size_t n = p.b.size();
    if (p.W.rows() != n || p.W.cols() != 2 * n) {
        throw std::invalid_argument("rnn_compose: W is " + shape_string(p.W) + ", expected " +
                                    std::to_string(n) + "x" + std::to_string(2 * n));
    }
    check_children(left, right, n);
    return rnn_apply(left.rep, right.rep, p);
}

NodeState rlstm_compose(const NodeState& left, const NodeState& right, const RlstmParams& p) {
    const std::size_t n = p.input.bias.size();
    for (const Gate* g : {&p.input, &p.forget_left, &p.forget_right, &p.output, &p.candidate}) {
        if (g->left.rows() != n || g->left.cols() != n || g->right.rows() != n ||
            g->right.cols() != n || g->bias.size() != n) {
            throw std::invalid_argument("rlstm_compose: gate shapes inconsistent with dimension " +
                                        std::to_string(n));
        }
    }
    check_children(left, right, n);
    ForwardTrace::GateValues scratch;
    return rlstm_apply(left, right, p, scratch);
}

// Forward / backward --------------------------------------------------------------

ForwardTrace forward(const BinaryTree& tree, const Model& model, std::optional<int> label) {
    if (label && (*label < 0 || *label >= kNumClasses)) {
        throw std::invalid_argument("forward: label " + std::to_string(*label) + " out of range");
    }
    const std::size_t n = model.dim();
    ForwardTrace t;
    t.kind = model.kind();
    t.dim = n;
    t.topology = tree.nodes();
    t.states.resize(tree.node_count());
    if (model.kind() == ModelKind::rlstm) {
        t.gates.resize(tree.node_count());
    }
    for (std::size_t i = 0; i < tree.node_count(); ++i) {
        const auto& node = tree.node(i);
        if (node.is_leaf()) {
            if (node.token < 0 || node.token > kMaxToken) {
                throw std::invalid_argument("forward: token " + std::to_string(node.token) +
                                            " out of range");
            }
            const auto row = model.embeddings.row(static_cast<std::size_t>(node.token));
            t.states[i] = {Vector(std::vector<double>(row.begin(), row.end())), Vector(n)};
            continue;
        }
        const NodeState& x = t.states[node.left];
        const NodeState& y = t.states[node.right];
        if (model.kind() == ModelKind::rnn) {
            t.states[i] = rnn_apply(x.rep, y.rep, model.rnn());
        } else {
            t.states[i] = rlstm_apply(x, y, model.rlstm(), t.gates[i]);
        }
    }
    t.scores = affine(model.classifier.weights, t.states[t.root()].rep, model.classifier.bias);
    t.distribution = softmax(t.scores);
    t.label = label;
    if (label) {
        // log-sum-exp form stays finite when p(label) underflows.
        const auto& s = t.scores.values();
        const double peak = *std::max_element(s.begin(), s.end());
        double total = 0.0;
        for (double v : s) {
            total += std::exp(v - peak);
        }
        t.loss = peak + std::log(total) - t.scores[static_cast<std::size_t>(*label)];
    }
    return t;
}

namespace {

void check_trace(const ForwardTrace& t, int label, const Model& model) {
    if (t.kind != model.kind() || t.dim != model.dim()) {
        throw std::invalid_argument("backward: trace was produced by a " +
                                    std::string(to_string(t.kind)) + " of dimension " +
                                    std::to_string(t.dim) + ", model is " +
                                    std::string(to_string(model.kind())) + " of dimension " +
                                    std::to_string(model.dim()));
    }
    if (t.states.empty() || t.states.size() != t.topology.size() ||
        t.distribution.size() != static_cast<std::size_t>(kNumClasses)) {
        throw std::invalid_argument("backward: incomplete trace");
    }
    if (label < 0 || label >= kNumClasses) {
        throw std::invalid_argument("backward: label " + std::to_string(label) + " out of range");
    }
}

void backprop_gate(const Gate& p, Gate& grad, const Vector& dz, const NodeState& x,
                   const NodeState& y, Vector& err_x, Vector& err_y) {
    const std::size_t n = dz.size();
    kernels::outer_acc(grad.left, 0, dz.data(), x.rep.data(), n);
    kernels::outer_acc(grad.right, 0, dz.data(), y.rep.data(), n);
    kernels::add(grad.bias.values(), dz.values());
    kernels::gemv_t_acc(p.left, dz.data(), err_x.data());
    kernels::gemv_t_acc(p.right, dz.data(), err_y.data());
}

}  // namespace

Gradients backward(ForwardTrace& t, int label, const Model& model) {
    check_trace(t, label, model);
    const std::size_t n = model.dim();
    const std::size_t count = t.states.size();
    Gradients g = Gradients::zeros_like(model);
    t.err_rep.assign(count, Vector(n));
    t.err_mem.assign(count, Vector(n));

    // Softmax + cross-entropy: dJ/dscores = p - onehot(label).
    Vector dscores = t.distribution;
    dscores[static_cast<std::size_t>(label)] -= 1.0;
    const Vector& root_rep = t.states[t.root()].rep;
    kernels::outer_acc(g.classifier.weights, 0, dscores.data(), root_rep.data(), n);
    kernels::add(g.classifier.bias.values(), dscores.values());
    kernels::gemv_t_acc(model.classifier.weights, dscores.data(), t.err_rep[t.root()].data());

    // Reverse post-order visits every parent before its children.
    for (std::size_t i = count; i-- > 0;) {
        const auto& node = t.topology[i];
        const Vector& err_rep = t.err_rep[i];
        if (node.is_leaf()) {
            auto [it, inserted] = g.embeddings.try_emplace(node.token, err_rep);
            if (!inserted) {
                kernels::add(it->second.values(), err_rep.values());
            }
            continue;
        }
        const NodeState& x = t.states[node.left];
        const NodeState& y = t.states[node.right];
        Vector& err_x = t.err_rep[node.left];
        Vector& err_y = t.err_rep[node.right];

        if (t.kind == ModelKind::rnn) {
            const RnnParams& p = model.rnn();
            RnnParams& gp = std::get<RnnParams>(g.composer);
            const Vector& rep = t.states[i].rep;
            Vector dz(n);
            for (std::size_t k = 0; k < n; ++k) {
                dz[k] = err_rep[k] * (1.0 - rep[k] * rep[k]);
            }
            kernels::outer_acc(gp.W, 0, dz.data(), x.rep.data(), n);
            kernels::outer_acc(gp.W, n, dz.data(), y.rep.data(), n);
            kernels::add(gp.b.values(), dz.values());
            kernels::gemv_t_acc_block(p.W, 0, n, dz.data(), err_x.data());
            kernels::gemv_t_acc_block(p.W, n, n, dz.data(), err_y.data());
            continue;
        }

        const RlstmParams& p = model.rlstm();
        RlstmParams& gp = std::get<RlstmParams>(g.composer);
        const auto& gv = t.gates[i];
        const Vector& err_mem = t.err_mem[i];
        Vector dz_i(n), dz_f1(n), dz_f2(n), dz_o(n), dz_u(n);
        Vector& mem_x = t.err_mem[node.left];
        Vector& mem_y = t.err_mem[node.right];
        for (std::size_t k = 0; k < n; ++k) {
            const double th = gv.tanh_mem[k];
            const double o = gv.output[k];
            // Total derivative w.r.t. the cell: direct memory path plus the rep path.
            const double dc = err_mem[k] + err_rep[k] * o * (1.0 - th * th);
            dz_o[k] = err_rep[k] * th * o * (1.0 - o);
            const double in = gv.input[k];
            const double u = gv.candidate[k];
            dz_i[k] = dc * u * in * (1.0 - in);
            dz_u[k] = dc * in * (1.0 - u * u);
            const double f1 = gv.forget_left[k];
            const double f2 = gv.forget_right[k];
            dz_f1[k] = dc * x.mem[k] * f1 * (1.0 - f1);
            dz_f2[k] = dc * y.mem[k] * f2 * (1.0 - f2);
            mem_x[k] += dc * f1;
            mem_y[k] += dc * f2;
        }
        backprop_gate(p.input, gp.input, dz_i, x, y, err_x, err_y);
        backprop_gate(p.forget_left, gp.forget_left, dz_f1, x, y, err_x, err_y);
        backprop_gate(p.forget_right, gp.forget_right, dz_f2, x, y, err_x, err_y);
        backprop_gate(p.output, gp.output, dz_o, x, y, err_x, err_y);
        backprop_gate(p.candidate, gp.candidate, dz_u, x, y, err_x, err_y);
    }
    return g;
}

int predict(const Vector& distribution) {
    int best = 0;
    for (std::size_t k = 1; k < distribution.size(); ++k) {
        if (distribution[k] > distribution[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(k);
        }
    }
    return best;
}

int predict(const ForwardTrace& trace) { return predict(trace.distribution); }

}  // namespace treegrad
