#include "treegrad/treebank.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace treegrad {

int label_of_keyword(Token t) {
    if (!is_keyword(t)) {
        throw std::invalid_argument("label_of_keyword: " + std::to_string(t) + " is not a keyword");
    }
    return t / 100;
}

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ": " + what
                                  : "column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

// Appends nodes in post-order; the only writer of BinaryTree::nodes_ besides
// the public factories.
struct TreeAssembler {
    std::vector<BinaryTree::Node> nodes;

    int add_leaf(Token t) {
        nodes.push_back({-1, -1, t});
        return static_cast<int>(nodes.size()) - 1;
    }
    int add_internal(int left, int right) {
        nodes.push_back({left, right, 0});
        return static_cast<int>(nodes.size()) - 1;
    }
    BinaryTree finish() && {
        BinaryTree t;
        t.nodes_ = std::move(nodes);
        return t;
    }
};

BinaryTree BinaryTree::leaf(Token token) {
    if (token < 0 || token > kMaxToken) {
        throw std::invalid_argument("token " + std::to_string(token) + " outside [0, 10000]");
    }
    BinaryTree t;
    t.nodes_.push_back({-1, -1, token});
    return t;
}

BinaryTree BinaryTree::join(const BinaryTree& left, const BinaryTree& right) {
    if (left.nodes_.empty() || right.nodes_.empty()) {
        throw std::invalid_argument("BinaryTree::join: empty subtree");
    }
    BinaryTree t;
    t.nodes_.reserve(left.nodes_.size() + right.nodes_.size() + 1);
    t.nodes_ = left.nodes_;
    const int offset = static_cast<int>(left.nodes_.size());
    for (Node n : right.nodes_) {
        if (!n.is_leaf()) {
            n.left += offset;
            n.right += offset;
        }
        t.nodes_.push_back(n);
    }
    t.nodes_.push_back({static_cast<int>(left.root()), static_cast<int>(t.nodes_.size()) - 1, 0});
    return t;
}

std::vector<Token> BinaryTree::leaves() const {
    // Post-order visits leaves left to right.
    std::vector<Token> out;
    out.reserve(leaf_count());
    for (const Node& n : nodes_) {
        if (n.is_leaf()) {
            out.push_back(n.token);
        }
    }
    return out;
}

std::vector<int> BinaryTree::depths() const {
    std::vector<int> d(nodes_.size(), 0);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        const Node& n = nodes_[i];
        if (!n.is_leaf()) {
            d[n.left] = d[i] + 1;
            d[n.right] = d[i] + 1;
        }
    }
    return d;
}

namespace {

void append_text(const BinaryTree& t, std::size_t i, std::string& out) {
    const auto& n = t.node(i);
    if (n.is_leaf()) {
        out += std::to_string(n.token);
        return;
    }
    out += '(';
    append_text(t, n.left, out);
    out += ' ';
    append_text(t, n.right, out);
    out += ')';
}

class TreeParser {
public:
    TreeParser(std::string_view text, std::size_t line_no, std::size_t column_base)
        : text_(text), line_(line_no), base_(column_base) {}

    BinaryTree run() {
        if (text_.empty()) {
            fail("expected a tree");
        }
        parse_node();
        if (pos_ != text_.size()) {
            fail("trailing characters after tree");
        }
        return std::move(out_).finish();
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(what, line_, base_ + pos_ + 1);
    }

    int parse_node() {
        if (pos_ >= text_.size()) {
            fail("unexpected end of tree");
        }
        if (text_[pos_] == '(') {
            ++pos_;
            const int left = parse_node();
            expect(' ');
            const int right = parse_node();
            expect(')');
            return out_.add_internal(left, right);
        }
        const std::size_t start = pos_;
        int value = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
        if (ec != std::errc() || ptr == text_.data() + pos_ || text_[start] == '-' ||
            text_[start] == '+') {
            fail("expected a token or '('");
        }
        if (value > kMaxToken) {
            fail("token " + std::to_string(value) + " outside [0, 10000]");
        }
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        return out_.add_leaf(value);
    }

    void expect(char c) {
        if (pos_ >= text_.size() || text_[pos_] != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    std::string_view text_;
    std::size_t line_;
    std::size_t base_;
    std::size_t pos_ = 0;
    TreeAssembler out_;
};

}  // namespace

std::string BinaryTree::to_string() const {
    std::string out;
    if (!nodes_.empty()) {
        append_text(*this, root(), out);
    }
    return out;
}

BinaryTree BinaryTree::parse(std::string_view text) { return TreeParser(text, 0, 0).run(); }

std::size_t keyword_node(const BinaryTree& tree) {
    std::size_t found = tree.node_count();
    std::size_t count = 0;
    for (std::size_t i = 0; i < tree.node_count(); ++i) {
        const auto& n = tree.node(i);
        if (n.is_leaf() && is_keyword(n.token)) {
            found = i;
            ++count;
        }
    }
    if (count != 1) {
        throw std::invalid_argument("tree has " + std::to_string(count) +
                                    " keyword leaves, expected exactly one");
    }
    return found;
}

int keyword_depth(const BinaryTree& tree) { return tree.depths()[keyword_node(tree)]; }

LabeledExample LabeledExample::from_tree(BinaryTree tree, bool constructive) {
    LabeledExample ex;
    const std::size_t k = keyword_node(tree);
    ex.keyword = tree.node(k).token;
    ex.label = label_of_keyword(ex.keyword);
    ex.keyword_depth = tree.depths()[k];
    ex.tree = std::move(tree);
    ex.constructive = constructive;
    return ex;
}

// Generation -----------------------------------------------------------------

std::vector<Token> gen_sentence(std::size_t length, SeededRng& rng) {
    if (length == 0) {
        throw std::invalid_argument("gen_sentence: length must be at least 1");
    }
    std::vector<Token> tokens;
    tokens.reserve(length);
    tokens.push_back(static_cast<Token>(rng.uniform_int(0, kKeywordLimit - 1)));
    for (std::size_t i = 1; i < length; ++i) {
        tokens.push_back(static_cast<Token>(rng.uniform_int(kKeywordLimit, kMaxToken)));
    }
    rng.shuffle(tokens);
    return tokens;
}

namespace {

int build_random(TreeAssembler& out, const std::vector<Token>& leaves, std::size_t lo,
                 std::size_t hi, SeededRng& rng) {
    const std::size_t count = hi - lo;
    if (count == 1) {
        return out.add_leaf(leaves[lo]);
    }
    const auto split = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(count) - 1));
    const int left = build_random(out, leaves, lo, lo + split, rng);
    const int right = build_random(out, leaves, lo + split, hi, rng);
    return out.add_internal(left, right);
}

}  // namespace

BinaryTree gen_random_tree(const std::vector<Token>& leaves, SeededRng& rng) {
    if (leaves.empty()) {
        throw std::invalid_argument("gen_random_tree: no leaves");
    }
    for (Token t : leaves) {
        if (t < 0 || t > kMaxToken) {
            throw std::invalid_argument("gen_random_tree: token " + std::to_string(t) +
                                        " outside [0, 10000]");
        }
    }
    TreeAssembler out;
    out.nodes.reserve(2 * leaves.size() - 1);
    build_random(out, leaves, 0, leaves.size(), rng);
    return std::move(out).finish();
}

BinaryTree gen_tree_with_keyword_depth(std::size_t length, int depth, SeededRng& rng) {
    if (length == 0 || depth < 0 || static_cast<std::size_t>(depth) > length - 1 ||
        (depth == 0 && length != 1)) {
        throw std::invalid_argument("gen_tree_with_keyword_depth: depth " + std::to_string(depth) +
                                    " impossible for " + std::to_string(length) + " leaves");
    }
    const Token keyword = static_cast<Token>(rng.uniform_int(0, kKeywordLimit - 1));
    if (depth == 0) {
        return BinaryTree::leaf(keyword);
    }
    // Uniform composition of (length - 1) into `depth` positive parts: choose
    // depth-1 distinct cut points from {1, ..., length-2}.
    const std::size_t others = length - 1;
    std::vector<std::size_t> cuts;
    {
        std::vector<std::size_t> pool(others - 1);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            pool[i] = i + 1;
        }
        // Partial Fisher-Yates picks depth-1 cut points.
        for (int c = 0; c < depth - 1; ++c) {
            const auto j = static_cast<std::size_t>(
                rng.uniform_int(c, static_cast<std::int64_t>(pool.size()) - 1));
            std::swap(pool[c], pool[j]);
            cuts.push_back(pool[c]);
        }
        std::sort(cuts.begin(), cuts.end());
    }
    std::vector<std::size_t> parts;
    std::size_t prev = 0;
    for (std::size_t c : cuts) {
        parts.push_back(c - prev);
        prev = c;
    }
    parts.push_back(others - prev);

    // parts[0] is the sibling at the root, parts[depth-1] the keyword's sibling.
    BinaryTree current = BinaryTree::leaf(keyword);
    for (int level = depth - 1; level >= 0; --level) {
        std::vector<Token> tokens(parts[level]);
        for (Token& t : tokens) {
            t = static_cast<Token>(rng.uniform_int(kKeywordLimit, kMaxToken));
        }
        BinaryTree sibling = gen_random_tree(tokens, rng);
        current = rng.uniform_int(0, 1) == 0 ? BinaryTree::join(current, sibling)
                                             : BinaryTree::join(sibling, current);
    }
    return current;
}

namespace {

void check_index(int index) {
    if (index < 1 || index > 10) {
        throw std::invalid_argument("dataset index must be in 1..10, got " + std::to_string(index));
    }
}

enum SplitId : std::uint64_t { kTrain = 0, kDev = 1, kTest = 2 };

// Each example draws from its own stream so output does not depend on the
// order in which examples are produced.
template <typename MakeExample>
std::vector<LabeledExample> gen_split(std::uint64_t dataset_seed, SplitId split, std::size_t count,
                                      MakeExample make) {
    const std::uint64_t split_seed = derive_seed(dataset_seed, split);
    std::vector<LabeledExample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        SeededRng rng(derive_seed(split_seed, i));
        out.push_back(make(rng));
    }
    return out;
}

std::uint64_t dataset_seed(int experiment, int index, std::uint64_t seed) {
    return derive_seed(seed, static_cast<std::uint64_t>(experiment * 100 + index));
}

}  // namespace

Dataset gen_dataset_exp1(int index, SplitSizes sizes, std::uint64_t seed) {
    check_index(index);
    const auto lo = static_cast<std::int64_t>(10 * index - 9);
    const auto hi = static_cast<std::int64_t>(10 * index);
    auto make = [&](SeededRng& rng) {
        const auto length = static_cast<std::size_t>(rng.uniform_int(lo, hi));
        auto sentence = gen_sentence(length, rng);
        return LabeledExample::from_tree(gen_random_tree(sentence, rng));
    };
    Dataset d;
    d.provenance = {1, index, sizes, seed};
    const std::uint64_t s = dataset_seed(1, index, seed);
    d.train = gen_split(s, kTrain, sizes.train, make);
    d.dev = gen_split(s, kDev, sizes.dev, make);
    d.test = gen_split(s, kTest, sizes.test, make);
    return d;
}

LabeledExample gen_example_exp2(int index, SeededRng& rng, std::size_t rejection_cap) {
    check_index(index);
    std::size_t length = 0;
    for (std::size_t attempt = 0; attempt < rejection_cap; ++attempt) {
        length = static_cast<std::size_t>(rng.uniform_int(21, 30));
        auto sentence = gen_sentence(length, rng);
        BinaryTree tree = gen_random_tree(sentence, rng);
        const int depth = keyword_depth(tree);
        if (depth == index || depth == index + 1) {
            return LabeledExample::from_tree(std::move(tree));
        }
    }
    if (length == 0) {
        length = static_cast<std::size_t>(rng.uniform_int(21, 30));
    }
    const int depth = index + static_cast<int>(rng.uniform_int(0, 1));
    return LabeledExample::from_tree(gen_tree_with_keyword_depth(length, depth, rng), true);
}

Dataset gen_dataset_exp2(int index, SplitSizes sizes, std::uint64_t seed, std::size_t rejection_cap) {
    check_index(index);
    auto make = [&](SeededRng& rng) { return gen_example_exp2(index, rng, rejection_cap); };
    Dataset d;
    d.provenance = {2, index, sizes, seed};
    const std::uint64_t s = dataset_seed(2, index, seed);
    d.train = gen_split(s, kTrain, sizes.train, make);
    d.dev = gen_split(s, kDev, sizes.dev, make);
    d.test = gen_split(s, kTest, sizes.test, make);
    return d;
}

// Files ----------------------------------------------------------------------

std::string format_example(const LabeledExample& ex) {
    return std::to_string(ex.label) + " " + ex.tree.to_string();
}

LabeledExample parse_example(std::string_view line, std::size_t line_no) {
    const std::size_t space = line.find(' ');
    if (space == std::string_view::npos || space == 0) {
        throw ParseError("expected '<label> <tree>'", line_no, 1);
    }
    int label = -1;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + space, label);
    if (ec != std::errc() || ptr != line.data() + space || label < 0 || label >= kNumClasses) {
        throw ParseError("label must be an integer in 0..9", line_no, 1);
    }
    BinaryTree tree = TreeParser(line.substr(space + 1), line_no, space + 1).run();
    LabeledExample ex;
    try {
        ex = LabeledExample::from_tree(std::move(tree));
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), line_no, space + 2);
    }
    if (ex.label != label) {
        throw ParseError("label " + std::to_string(label) + " disagrees with keyword " +
                             std::to_string(ex.keyword),
                         line_no, 1);
    }
    return ex;
}

namespace {

std::string header_line(const Provenance& p, std::string_view split) {
    std::ostringstream os;
    os << "# experiment=" << p.experiment << " index=" << p.index << " split=" << split
       << " seed=" << p.seed << " train=" << p.sizes.train << " dev=" << p.sizes.dev
       << " test=" << p.sizes.test;
    return os.str();
}

std::map<std::string, std::string> parse_pairs(std::string_view text, std::size_t line_no) {
    std::map<std::string, std::string> out;
    std::istringstream is{std::string(text)};
    std::string item;
    while (is >> item) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected key=value in header, got '" + item + "'", line_no, 1);
        }
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

template <typename T>
T parse_number(const std::map<std::string, std::string>& kv, const std::string& key,
               std::size_t line_no) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        throw ParseError("header missing '" + key + "'", line_no, 1);
    }
    T value{};
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError("header field '" + key + "' is not a number", line_no, 1);
    }
    return value;
}

}  // namespace

void write_split(const std::filesystem::path& path, const Provenance& prov, std::string_view split,
                 const std::vector<LabeledExample>& examples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << header_line(prov, split) << '\n';
    std::string constructive;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (examples[i].constructive) {
            if (!constructive.empty()) {
                constructive += ',';
            }
            constructive += std::to_string(i);
        }
    }
    if (!constructive.empty()) {
        out << "# constructive=" << constructive << '\n';
    }
    for (const auto& ex : examples) {
        out << format_example(ex) << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

std::vector<LabeledExample> read_split(const std::filesystem::path& path, Provenance* prov) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<LabeledExample> out;
    std::vector<std::size_t> constructive;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const auto kv = parse_pairs(std::string_view(line).substr(1), line_no);
            if (auto it = kv.find("constructive"); it != kv.end()) {
                std::istringstream is(it->second);
                std::string idx;
                while (std::getline(is, idx, ',')) {
                    std::size_t v = 0;
                    auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), v);
                    if (ec != std::errc() || ptr != idx.data() + idx.size()) {
                        throw ParseError("bad constructive index '" + idx + "'", line_no, 1);
                    }
                    constructive.push_back(v);
                }
            } else if (prov != nullptr && kv.count("experiment") != 0) {
                prov->experiment = parse_number<int>(kv, "experiment", line_no);
                prov->index = parse_number<int>(kv, "index", line_no);
                prov->seed = parse_number<std::uint64_t>(kv, "seed", line_no);
                prov->sizes.train = parse_number<std::size_t>(kv, "train", line_no);
                prov->sizes.dev = parse_number<std::size_t>(kv, "dev", line_no);
                prov->sizes.test = parse_number<std::size_t>(kv, "test", line_no);
            }
            continue;
        }
        out.push_back(parse_example(line, line_no));
    }
    for (std::size_t idx : constructive) {
        if (idx >= out.size()) {
            throw std::runtime_error(path.string() + ": constructive index " + std::to_string(idx) +
                                     " out of range");
        }
        out[idx].constructive = true;
    }
    return out;
}

namespace {

std::string depth_histogram(const std::vector<LabeledExample>& xs) {
    std::map<int, std::size_t> h;
    for (const auto& ex : xs) {
        ++h[ex.keyword_depth];
    }
    std::string out;
    for (auto [d, c] : h) {
        if (!out.empty()) {
            out += ',';
        }
        out += std::to_string(d) + ":" + std::to_string(c);
    }
    return out;
}

std::size_t constructive_count(const std::vector<LabeledExample>& xs) {
    return static_cast<std::size_t>(
        std::count_if(xs.begin(), xs.end(), [](const auto& e) { return e.constructive; }));
}

}  // namespace

void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_split(dir / "train.txt", d.provenance, "train", d.train);
    write_split(dir / "dev.txt", d.provenance, "dev", d.dev);
    write_split(dir / "test.txt", d.provenance, "test", d.test);

    std::ofstream meta(dir / "meta", std::ios::binary);
    if (!meta) {
        throw std::runtime_error("cannot write " + (dir / "meta").string());
    }
    const auto& p = d.provenance;
    meta << "experiment=" << p.experiment << '\n'
         << "index=" << p.index << '\n'
         << "seed=" << p.seed << '\n'
         << "train=" << p.sizes.train << '\n'
         << "dev=" << p.sizes.dev << '\n'
         << "test=" << p.sizes.test << '\n';
    const std::pair<const char*, const std::vector<LabeledExample>*> splits[] = {
        {"train", &d.train}, {"dev", &d.dev}, {"test", &d.test}};
    for (auto [name, xs] : splits) {
        meta << "depths_" << name << '=' << depth_histogram(*xs) << '\n';
        meta << "constructive_" << name << '=' << constructive_count(*xs) << '\n';
    }
}

Dataset read_dataset(const std::filesystem::path& dir) {
    Dataset d;
    Provenance from_dev;
    Provenance from_test;
    d.train = read_split(dir / "train.txt", &d.provenance);
    d.dev = read_split(dir / "dev.txt", &from_dev);
    d.test = read_split(dir / "test.txt", &from_test);
    if (!(from_dev == d.provenance) || !(from_test == d.provenance)) {
        throw std::runtime_error(dir.string() + ": split headers disagree on provenance");
    }
    const auto& s = d.provenance.sizes;
    if (d.train.size() != s.train || d.dev.size() != s.dev || d.test.size() != s.test) {
        throw std::runtime_error(dir.string() + ": split sizes do not match the header");
    }
    return d;
}

}  // namespace treegrad
