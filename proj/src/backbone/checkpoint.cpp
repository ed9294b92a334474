#include "kicl/backbone/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "kicl/error.hpp"

namespace kicl {
namespace {

using json = nlohmann::json;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

    bool done() const { return pos_ == bytes_.size(); }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        return std::bit_cast<double>(v);
    }

    std::string str(std::size_t len) {
        need(len);
        std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
        pos_ += len;
        return s;
    }

private:
    void need(std::size_t k) const {
        if (bytes_.size() - pos_ < k) throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

json hyper_to_json(const Hyperparameters& hp) {
    return json{{"width", hp.width},         {"heads", hp.heads},
                {"col_layers", hp.col_layers}, {"row_layers", hp.row_layers},
                {"icl_layers", hp.icl_layers}, {"inducing", hp.inducing},
                {"classes", hp.classes},     {"key_dim", hp.key_dim},
                {"ffn_multiplier", hp.ffn_multiplier}, {"mode", to_string(hp.mode)},
                {"unit_norm", hp.unit_norm}};
}

Hyperparameters hyper_from_json(const json& j) {
    Hyperparameters hp;
    hp.width = j.at("width").get<std::size_t>();
    hp.heads = j.at("heads").get<std::size_t>();
    hp.col_layers = j.at("col_layers").get<std::size_t>();
    hp.row_layers = j.at("row_layers").get<std::size_t>();
    hp.icl_layers = j.at("icl_layers").get<std::size_t>();
    hp.inducing = j.at("inducing").get<std::size_t>();
    hp.classes = j.at("classes").get<std::size_t>();
    hp.key_dim = j.at("key_dim").get<std::size_t>();
    hp.ffn_multiplier = j.at("ffn_multiplier").get<std::size_t>();
    hp.mode = parse_embedding_mode(j.at("mode").get<std::string>());
    hp.unit_norm = j.at("unit_norm").get<bool>();
    return hp;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out{'K', 'I', 'C', 'L'};
    put_u32(out, kCheckpointVersion);
    const json meta{{"hyperparameters", hyper_to_json(ckpt.params.hyper())}, {"annotations", ckpt.annotations}};
    const std::string text = meta.dump();
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& [name, t] : ckpt.params.tensors()) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.data()) put_f64(out, v);
    }
    return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.str(4) != "KICL") throw IoError("not a checkpoint file (bad magic)");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    json meta;
    try {
        meta = json::parse(r.str(r.u32()));
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }
    Checkpoint ckpt;
    Hyperparameters hp;
    try {
        hp = hyper_from_json(meta.at("hyperparameters"));
        if (meta.contains("annotations"))
            ckpt.annotations = meta.at("annotations").get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint metadata incomplete: ") + e.what());
    }
    std::map<std::string, Tensor> tensors;
    while (!r.done()) {
        std::string name = r.str(r.u32());
        const auto rank = r.u32();
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) d = r.u32();
        std::vector<double> data(product(dims));
        for (auto& v : data) v = r.f64();
        tensors.emplace(std::move(name), Tensor(std::move(dims), std::move(data)));
    }
    try {
        ckpt.params = ModelParameters(hp, std::move(tensors));
    } catch (const ContractViolation& e) {
        throw IoError(std::string("checkpoint tensors inconsistent with its metadata: ") + e.what());
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace kicl
