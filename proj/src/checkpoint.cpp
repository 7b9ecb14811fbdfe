#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "treegrad/model.hpp"

namespace treegrad {

namespace {

constexpr char kMagic[8] = {'T', 'G', 'C', 'K', 'P', 'T', '\0', '\1'};
constexpr std::uint32_t kVersion = 1;

// All integers and doubles are stored little-endian regardless of host order.
class Writer {
public:
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    void u32(std::uint32_t v) { le(v); }
    void u64(std::uint64_t v) { le(v); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::string take() && { return std::move(out_); }

private:
    template <typename U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    }
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    void bytes(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, data_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    std::uint64_t u64() { return le<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    bool at_end() const noexcept { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw std::runtime_error("checkpoint truncated at byte " + std::to_string(pos_));
        }
    }
    template <typename U>
    U le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Model& model) {
    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.u32(kVersion);
    w.u32(model.kind() == ModelKind::rnn ? 0 : 1);
    w.u64(model.dim());
    w.u64(model.seed_lineage.size());
    for (auto s : model.seed_lineage) {
        w.u64(s);
    }
    const auto blocks = model.blocks();
    w.u32(static_cast<std::uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
        w.str(b.name);
        w.u64(b.rows);
        w.u64(b.cols);
        for (double v : b.values) {
            w.f64(v);
        }
    }
    return std::move(w).take();
}

Model deserialize_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    char magic[sizeof(kMagic)];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a treegrad checkpoint (bad magic)");
    }
    if (const auto v = r.u32(); v != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(v));
    }
    const std::uint32_t kind_code = r.u32();
    if (kind_code > 1) {
        throw std::runtime_error("checkpoint: unknown model kind code " + std::to_string(kind_code));
    }
    const std::uint64_t dim = r.u64();
    if (dim == 0 || dim > 100000) {
        throw std::runtime_error("checkpoint: implausible dimension " + std::to_string(dim));
    }
    Model m = Model::zeros(kind_code == 0 ? ModelKind::rnn : ModelKind::rlstm, dim);
    const std::uint64_t lineage = r.u64();
    if (lineage > 1024) {
        throw std::runtime_error("checkpoint: implausible seed lineage length");
    }
    for (std::uint64_t i = 0; i < lineage; ++i) {
        m.seed_lineage.push_back(r.u64());
    }
    auto blocks = m.blocks();
    const std::uint32_t count = r.u32();
    if (count != blocks.size()) {
        throw std::runtime_error("checkpoint: expected " + std::to_string(blocks.size()) +
                                 " blocks, found " + std::to_string(count));
    }
    for (auto& b : blocks) {
        const std::string name = r.str();
        const std::uint64_t rows = r.u64();
        const std::uint64_t cols = r.u64();
        if (name != b.name || rows != b.rows || cols != b.cols) {
            throw std::runtime_error("checkpoint: block '" + name + "' " + std::to_string(rows) +
                                     "x" + std::to_string(cols) + " does not match expected '" +
                                     b.name + "' " + std::to_string(b.rows) + "x" +
                                     std::to_string(b.cols));
        }
        for (double& v : b.values) {
            v = r.f64();
        }
    }
    if (!r.at_end()) {
        throw std::runtime_error("checkpoint: trailing bytes");
    }
    return m;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(model);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("cannot write checkpoint " + path.string());
    }
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return deserialize_checkpoint(bytes);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace treegrad
