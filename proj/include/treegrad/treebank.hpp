#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "treegrad/numerics.hpp"

namespace treegrad {

inline constexpr int kMaxToken = 10000;
inline constexpr int kKeywordLimit = 1000;  // tokens below this are keywords
inline constexpr int kNumClasses = 10;

using Token = int;

inline bool is_keyword(Token t) noexcept { return t >= 0 && t < kKeywordLimit; }

/// Keyword → class label (hundreds digit). Throws if t is not a keyword.
int label_of_keyword(Token t);

/// Leaf-labelled binary tree stored in post-order: children always precede
/// their parent and the root is the last node.
class BinaryTree {
public:
    struct Node {
        int left = -1;   // -1 for leaves
        int right = -1;
        Token token = 0;  // meaningful only for leaves

        bool is_leaf() const noexcept { return left < 0; }
        friend bool operator==(const Node&, const Node&) = default;
    };

    static BinaryTree leaf(Token token);
    static BinaryTree join(const BinaryTree& left, const BinaryTree& right);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t leaf_count() const noexcept { return (nodes_.size() + 1) / 2; }
    std::size_t internal_count() const noexcept { return nodes_.size() / 2; }
    std::size_t root() const noexcept { return nodes_.size() - 1; }
    const Node& node(std::size_t i) const { return nodes_[i]; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }

    /// Leaf tokens left to right.
    std::vector<Token> leaves() const;
    /// Edge count from the root to every node, indexed like nodes().
    std::vector<int> depths() const;

    /// Bracketed form: a leaf is its integer, an internal node is "(<left> <right>)".
    std::string to_string() const;
    /// Parses the bracketed form. Throws ParseError on malformed text.
    static BinaryTree parse(std::string_view text);

    friend bool operator==(const BinaryTree&, const BinaryTree&) = default;

private:
    friend struct TreeAssembler;
    std::vector<Node> nodes_;
};

/// Malformed text. line() is 1-based (0 when not tied to a file), column() is 1-based.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column);
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Node index of the unique keyword leaf. Throws if there are zero or several.
std::size_t keyword_node(const BinaryTree& tree);
/// Edges from the root to the unique keyword leaf.
int keyword_depth(const BinaryTree& tree);

struct LabeledExample {
    BinaryTree tree;
    int label = 0;
    Token keyword = 0;
    int keyword_depth = 0;
    /// Experiment 2 only: true when the constructive fallback produced the tree.
    bool constructive = false;

    /// Derives label, keyword and depth from the tree.
    static LabeledExample from_tree(BinaryTree tree, bool constructive = false);

    friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct SplitSizes {
    std::size_t train = 10000;
    std::size_t dev = 1000;
    std::size_t test = 1000;
    friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

struct Provenance {
    int experiment = 1;
    int index = 1;
    SplitSizes sizes;
    std::uint64_t seed = 0;
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Dataset {
    Provenance provenance;
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> dev;
    std::vector<LabeledExample> test;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// l-1 non-keywords uniform on [1000, 10000] plus one keyword uniform on
/// [0, 999], shuffled. Throws if length == 0.
std::vector<Token> gen_sentence(std::size_t length, SeededRng& rng);

/// Random binary tree over the given leaves (kept in order). Each span of
/// l > 1 leaves splits at k uniform on {1, ..., l-1}; both halves recurse.
BinaryTree gen_random_tree(const std::vector<Token>& leaves, SeededRng& rng);

/// Tree over `length` fresh tokens whose keyword sits at exactly `depth`
/// edges below the root. Off-path subtree sizes are a uniform composition of
/// length-1 into `depth` positive parts; path orientation is random.
/// Requires 1 <= depth <= length-1 (or depth == 0 with length == 1).
BinaryTree gen_tree_with_keyword_depth(std::size_t length, int depth, SeededRng& rng);

inline constexpr std::size_t kExp2RejectionCap = 10000;

/// Experiment 1: lengths uniform on [10i-9, 10i], random trees.
Dataset gen_dataset_exp1(int index, SplitSizes sizes, std::uint64_t seed);

/// Experiment 2: lengths uniform on [21, 30], keyword depth in {i, i+1}.
/// Each example is drawn by rejection (fresh sentence and tree per attempt) up
/// to `rejection_cap` attempts, then by gen_tree_with_keyword_depth.
Dataset gen_dataset_exp2(int index, SplitSizes sizes, std::uint64_t seed,
                         std::size_t rejection_cap = kExp2RejectionCap);

/// Draws one Experiment-2 example; exposed for testing the fallback path.
LabeledExample gen_example_exp2(int index, SeededRng& rng, std::size_t rejection_cap);

// Dataset files ---------------------------------------------------------------
//
// A split file holds one example per line, "<label> <tree>", preceded by
// '#' header lines:
//   # experiment=<e> index=<i> split=<name> seed=<s> train=<n> dev=<n> test=<n>
//   # constructive=<comma-separated example indices>   (only when non-empty)
// A dataset directory holds train.txt, dev.txt, test.txt and a key=value
// `meta` file.

std::string format_example(const LabeledExample& ex);
/// Parses "<label> <tree>" and checks it against the tree. line_no is used in errors.
LabeledExample parse_example(std::string_view line, std::size_t line_no);

void write_split(const std::filesystem::path& path, const Provenance& prov, std::string_view split,
                 const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> read_split(const std::filesystem::path& path, Provenance* prov = nullptr);

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace treegrad
