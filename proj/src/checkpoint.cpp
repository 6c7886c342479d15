#include "bioembed/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bioembed/errors.hpp"
#include "bioembed/rng.hpp"

namespace bioembed {
namespace {

constexpr char kMagic[4] = {'B', 'C', 'K', '1'};

void append_f32(std::string& out, double v) {
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

std::string payload(const ModelParams& params) {
    std::string out;
    out.reserve(params.parameter_count() * 4);
    for (const auto& [name, values] : params.blocks()) {
        for (double v : values) append_f32(out, v);
    }
    return out;
}

ModelParams shaped_zeros(const ModelDims& dims) {
    ModelParams p;
    p.dims = dims;
    const int C = dims.num_classes;
    p.embed_w1 = Eigen::MatrixXd::Zero(dims.hidden, dims.patch_size());
    p.embed_b1 = Eigen::VectorXd::Zero(dims.hidden);
    p.embed_w2 = Eigen::MatrixXd::Zero(dims.d, dims.hidden);
    p.embed_b2 = Eigen::VectorXd::Zero(dims.d);
    p.linear_w = Eigen::MatrixXd::Zero(C, dims.d);
    p.linear_b = Eigen::VectorXd::Zero(C);
    p.prototypes = Eigen::MatrixXd::Zero(C * dims.prototypes_per_class, dims.d);
    p.source_w1 = Eigen::MatrixXd::Zero(dims.source_rank, dims.d);
    p.source_w2 = Eigen::MatrixXd::Zero(dims.num_sources, dims.source_rank);
    return p;
}

}  // namespace

nlohmann::ordered_json dims_to_json(const ModelDims& d) {
    return {{"frames", d.frames},
            {"mel_bins", d.mel_bins},
            {"grid_t", d.grid_t},
            {"grid_f", d.grid_f},
            {"hidden", d.hidden},
            {"d", d.d},
            {"num_classes", d.num_classes},
            {"prototypes_per_class", d.prototypes_per_class},
            {"source_rank", d.source_rank},
            {"num_sources", d.num_sources},
            {"similarity", to_string(d.similarity)}};
}

ModelDims dims_from_json(const nlohmann::json& j) {
    ModelDims d;
    d.frames = j.at("frames").get<int>();
    d.mel_bins = j.at("mel_bins").get<int>();
    d.grid_t = j.at("grid_t").get<int>();
    d.grid_f = j.at("grid_f").get<int>();
    d.hidden = j.at("hidden").get<int>();
    d.d = j.at("d").get<int>();
    d.num_classes = j.at("num_classes").get<int>();
    d.prototypes_per_class = j.at("prototypes_per_class").get<int>();
    d.source_rank = j.at("source_rank").get<int>();
    d.num_sources = j.at("num_sources").get<int>();
    d.similarity = parse_similarity(j.at("similarity").get<std::string>());
    d.validate();
    return d;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const CheckpointHeader& header) {
    nlohmann::ordered_json h;
    h["format"] = "bioembed-checkpoint";
    h["version"] = 1;
    h["dims"] = dims_to_json(params.dims);
    nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
    for (auto& b : const_cast<ModelParams&>(params).blocks()) {
        blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
    }
    h["blocks"] = std::move(blocks);
    h["phase"] = header.phase;
    h["seed"] = header.seed;
    h["classes"] = header.classes;
    nlohmann::ordered_json tax = nlohmann::ordered_json::object();
    for (const auto& [name, t] : header.taxonomy) tax[name] = {t.genus, t.family, t.order};
    h["taxonomy"] = std::move(tax);
    h["config"] = header.config;
    const std::string text = h.dump();

    std::string out(kMagic, 4);
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
    out += text;
    out += payload(params);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write checkpoint: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open checkpoint: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw ParseError("not a checkpoint file: " + path.string());
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t(static_cast<unsigned char>(bytes[4 + i])) << (8 * i);
    if (bytes.size() < 8 + static_cast<std::size_t>(len)) throw ParseError("truncated checkpoint header");

    Checkpoint ck;
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(bytes.substr(8, len));
        ck.params = shaped_zeros(dims_from_json(h.at("dims")));
        ck.header.phase = h.at("phase").get<std::string>();
        ck.header.seed = h.at("seed").get<std::uint64_t>();
        ck.header.classes = h.at("classes").get<std::vector<std::string>>();
        for (const auto& [name, arr] : h.at("taxonomy").items()) {
            ck.header.taxonomy[name] = {arr.at(0).get<std::string>(), arr.at(1).get<std::string>(),
                                        arr.at(2).get<std::string>()};
        }
        ck.header.config = h.at("config");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint header: " + std::string(e.what()));
    }

    std::size_t pos = 8 + len;
    const std::size_t expected = ck.params.parameter_count() * 4;
    if (bytes.size() - pos != expected) {
        throw ParseError("checkpoint payload has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                         std::to_string(expected));
    }
    ck.checksum = fnv1a64(std::string_view(bytes).substr(pos));
    for (auto& b : ck.params.blocks()) {
        for (double& v : b.values) {
            std::uint32_t u = 0;
            for (int i = 0; i < 4; ++i) u |= std::uint32_t(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
            v = static_cast<double>(std::bit_cast<float>(u));
            pos += 4;
        }
    }
    if (ck.header.classes.size() != static_cast<std::size_t>(ck.params.dims.num_classes)) {
        throw ParseError("checkpoint class list does not match num_classes");
    }
    return ck;
}

std::uint64_t params_checksum(const ModelParams& params) { return fnv1a64(payload(params)); }

void round_to_float(ModelParams& params) {
    for (auto& b : params.blocks()) {
        for (double& v : b.values) v = static_cast<double>(static_cast<float>(v));
    }
}

}  // namespace bioembed
