#include "hamprune/io.hpp"

#include <fstream>
#include <stdexcept>

namespace hamprune {

namespace {

constexpr char kCkptMagic[8] = {'H', 'A', 'M', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& out, const T& x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T x{};
    in.read(reinterpret_cast<char*>(&x), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return x;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put<uint32_t>(out, uint32_t(t.shape.size()));
    for (size_t e : t.shape) put<uint64_t>(out, uint64_t(e));
    out.write(reinterpret_cast<const char*>(t.data()),
              std::streamsize(t.numel() * sizeof(double)));
}

Tensor get_tensor(std::istream& in) {
    uint32_t nd = get<uint32_t>(in);
    std::vector<size_t> shape(nd);
    for (auto& e : shape) e = size_t(get<uint64_t>(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.numel() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor");
    return t;
}

void put_tensors(std::ostream& out, const std::vector<Tensor>& ts) {
    put<uint32_t>(out, uint32_t(ts.size()));
    for (const auto& t : ts) put_tensor(out, t);
}

std::vector<Tensor> get_tensors(std::istream& in) {
    uint32_t n = get<uint32_t>(in);
    std::vector<Tensor> ts;
    ts.reserve(n);
    for (uint32_t i = 0; i < n; ++i) ts.push_back(get_tensor(in));
    return ts;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(kCkptMagic, 8);
    put<uint32_t>(out, 1);  // version
    put<uint64_t>(out, ckpt.schema_hash);

    put<uint8_t>(out, ckpt.layer.use_projection ? 1 : 0);
    put<uint64_t>(out, uint64_t(ckpt.layer.proj_dim));
    put_tensors(out, ckpt.layer.tables);
    put_tensors(out, ckpt.layer.projections);

    put<uint8_t>(out, uint8_t(ckpt.model.kind));
    put_tensor(out, ckpt.model.w0);
    put_tensors(out, ckpt.model.first_order);
    put_tensors(out, ckpt.model.mlp.weights);
    put_tensors(out, ckpt.model.mlp.biases);
    put_tensors(out, ckpt.model.cross_w);
    put_tensors(out, ckpt.model.cross_b);
    put_tensors(out, ckpt.model.head.weights);
    put_tensors(out, ckpt.model.head.biases);

    put<uint64_t>(out, uint64_t(ckpt.alpha.size()));
    out.write(reinterpret_cast<const char*>(ckpt.alpha.data()),
              std::streamsize(ckpt.alpha.size() * sizeof(double)));
    put<uint8_t>(out, ckpt.strategy_tag);
    put<uint64_t>(out, ckpt.mask_seed);
    if (!out) throw std::runtime_error("save_checkpoint: write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, kCkptMagic))
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    uint32_t version = get<uint32_t>(in);
    if (version != 1) throw std::runtime_error("load_checkpoint: unsupported version");

    Checkpoint ckpt;
    ckpt.schema_hash = get<uint64_t>(in);
    ckpt.layer.use_projection = get<uint8_t>(in) != 0;
    ckpt.layer.proj_dim = size_t(get<uint64_t>(in));
    ckpt.layer.tables = get_tensors(in);
    ckpt.layer.projections = get_tensors(in);

    ckpt.model.kind = ModelKind(get<uint8_t>(in));
    ckpt.model.w0 = get_tensor(in);
    ckpt.model.first_order = get_tensors(in);
    ckpt.model.mlp.weights = get_tensors(in);
    ckpt.model.mlp.biases = get_tensors(in);
    ckpt.model.cross_w = get_tensors(in);
    ckpt.model.cross_b = get_tensors(in);
    ckpt.model.head.weights = get_tensors(in);
    ckpt.model.head.biases = get_tensors(in);

    uint64_t n_alpha = get<uint64_t>(in);
    ckpt.alpha.resize(n_alpha);
    in.read(reinterpret_cast<char*>(ckpt.alpha.data()),
            std::streamsize(n_alpha * sizeof(double)));
    ckpt.strategy_tag = get<uint8_t>(in);
    ckpt.mask_seed = get<uint64_t>(in);
    if (!in) throw std::runtime_error("load_checkpoint: truncated file");
    return ckpt;
}

}  // namespace hamprune
