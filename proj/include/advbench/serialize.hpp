#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "advbench/data.hpp"
#include "advbench/model.hpp"

namespace advbench {

using nlohmann::json;

// ---- low-level container plumbing ---------------------------------------------

namespace bin {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
inline void put_f64(std::vector<unsigned char>& out, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(out, v);
}

struct Reader {
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;
    std::string origin;

    void need(std::size_t n) const {
        if (pos + n > buf.size())
            fail("container ", origin, ": truncated, wanted ", n, " bytes at offset ",
                 pos, " of ", buf.size());
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t v = u64();
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
};

}  // namespace bin

// Atomic file write: temp file in the target directory, then rename.
inline void write_file_atomic(const std::string& path,
                              const std::vector<unsigned char>& bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail("cannot write ", tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) fail("short write to ", tmp.string());
    }
    fs::rename(tmp, target);
}

inline void write_file_atomic(const std::string& path, const std::string& text) {
    write_file_atomic(path, std::vector<unsigned char>(text.begin(), text.end()));
}

inline std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open ", path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

namespace detail {

// Shared framing: MAGIC(8) | version u32 | header_len u64 | header json |
// payload | fnv64 of everything before the checksum.
inline std::vector<unsigned char> seal_container(const char magic[9],
                                                 std::uint32_t version,
                                                 const json& header,
                                                 const std::vector<unsigned char>& payload) {
    std::vector<unsigned char> out;
    out.insert(out.end(), magic, magic + 8);
    bin::put_u32(out, version);
    const std::string h = header.dump();
    bin::put_u64(out, h.size());
    out.insert(out.end(), h.begin(), h.end());
    out.insert(out.end(), payload.begin(), payload.end());
    Fnv1a sum;
    sum.update(out.data(), out.size());
    bin::put_u64(out, sum.digest());
    return out;
}

inline std::pair<json, bin::Reader> open_container(const std::vector<unsigned char>& buf,
                                                   const char magic[9],
                                                   std::uint32_t version,
                                                   const std::string& origin) {
    bin::Reader r{buf, 0, origin};
    if (buf.size() < 8 + 4 + 8 + 8) fail("container ", origin, ": too short");
    Fnv1a sum;
    sum.update(buf.data(), buf.size() - 8);
    bin::Reader tail{buf, buf.size() - 8, origin};
    if (tail.u64() != sum.digest())
        fail("container ", origin, ": checksum mismatch, file is corrupt");
    if (r.bytes(8) != std::string(magic, 8))
        fail("container ", origin, ": bad magic, not a ", magic, " file");
    const std::uint32_t got = r.u32();
    if (got != version)
        fail("container ", origin, ": version ", got, " unsupported; this build reads version ",
             version, " — re-export the artifact with a matching toolchain");
    const std::uint64_t hlen = r.u64();
    json header;
    try {
        header = json::parse(r.bytes(static_cast<std::size_t>(hlen)));
    } catch (const std::exception& e) {
        fail("container ", origin, ": unreadable header: ", e.what());
    }
    return {header, r};
}

}  // namespace detail

// ---- LayerSpec <-> json --------------------------------------------------------

inline json layer_to_json(const LayerSpec& l) {
    switch (l.kind) {
        case LayerKind::conv:
            return {{"kind", "conv"},
                    {"out_channels", l.out_channels},
                    {"kernel", l.kernel},
                    {"padding", l.padding == Padding::same ? "same" : "valid"}};
        case LayerKind::relu: return {{"kind", "relu"}};
        case LayerKind::maxpool: return {{"kind", "maxpool"}};
        case LayerKind::dense: return {{"kind", "dense"}, {"units", l.units}};
        case LayerKind::softmax_head:
            return {{"kind", "softmax_head"}, {"units", l.units}};
        case LayerKind::dropout: return {{"kind", "dropout"}, {"rate", l.rate}};
        case LayerKind::random_spiking:
            return {{"kind", "random_spiking"}, {"keep_prob", l.keep_prob}};
    }
    fail("layer_to_json: unknown kind");
}

inline LayerSpec layer_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "conv")
        return LayerSpec::conv2d(j.at("out_channels"), j.at("kernel"),
                                 j.at("padding") == "same" ? Padding::same
                                                           : Padding::valid);
    if (kind == "relu") return LayerSpec::relu();
    if (kind == "maxpool") return LayerSpec::maxpool();
    if (kind == "dense") return LayerSpec::dense(j.at("units"));
    if (kind == "softmax_head") return LayerSpec::softmax_head(j.at("units"));
    if (kind == "dropout") return LayerSpec::dropout(j.at("rate"));
    if (kind == "random_spiking") return LayerSpec::random_spiking(j.at("keep_prob"));
    fail("layer_from_json: unknown kind '", kind, "'");
}

// ---- model checkpoints ----------------------------------------------------------

constexpr char kCheckpointMagic[9] = "ADVBCKP1";
constexpr std::uint32_t kCheckpointVersion = 1;

// Self-describing checkpoint: architecture, seed, scheme, and raw
// little-endian f64 parameter blobs. Loading rebuilds a forward-identical
// model bit-exactly.
inline void save_checkpoint(const Model& model, const std::string& path,
                            const std::string& manifest_hash = "") {
    json header;
    header["format"] = "advbench-checkpoint";
    header["scheme"] = model.scheme;
    header["seed"] = model.seed;
    header["input_shape"] = model.input_shape;
    header["manifest_hash"] = manifest_hash;
    json layers = json::array();
    for (const auto& l : model.layers) layers.push_back(layer_to_json(l));
    header["layers"] = layers;
    json params = json::array();
    for (const auto& p : model.params)
        params.push_back({{"name", p.name}, {"shape", p.value.shape()}});
    header["params"] = params;

    std::vector<unsigned char> payload;
    for (const auto& p : model.params)
        for (double v : p.value.data()) bin::put_f64(payload, v);
    write_file_atomic(path,
                      detail::seal_container(kCheckpointMagic, kCheckpointVersion,
                                             header, payload));
}

struct LoadedCheckpoint {
    Model model;
    std::string manifest_hash;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    const auto buf = read_file(path);
    auto [header, r] =
        detail::open_container(buf, kCheckpointMagic, kCheckpointVersion, path);
    std::vector<LayerSpec> layers;
    for (const auto& lj : header.at("layers")) layers.push_back(layer_from_json(lj));
    Shape input_shape = header.at("input_shape").get<Shape>();
    Model model = build_model(std::move(layers), input_shape, header.at("seed"));
    model.scheme = header.at("scheme");
    const auto& params = header.at("params");
    if (params.size() != model.params.size())
        fail("checkpoint ", path, ": parameter count ", params.size(),
             " does not match architecture (", model.params.size(), ")");
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        const json& pj = params[i];
        if (pj.at("name") != model.params[i].name ||
            pj.at("shape").get<Shape>() != model.params[i].value.shape())
            fail("checkpoint ", path, ": parameter ", i, " mismatch (",
                 pj.at("name").get<std::string>(), ")");
        for (double& v : model.params[i].value.data()) v = r.f64();
    }
    model.freeze_params();
    LoadedCheckpoint out;
    out.model = std::move(model);
    out.manifest_hash = header.value("manifest_hash", "");
    return out;
}

// ---- adversarial example corpora -------------------------------------------------

constexpr char kCorpusMagic[9] = "ADVCORP1";
constexpr std::uint32_t kCorpusVersion = 1;

// One stored adversarial example. The original image is referenced by dataset
// index; perturbed pixels are stored in full precision.
struct CorpusRecord {
    std::uint32_t original_index = 0;
    std::int32_t true_label = -1;
    std::int32_t target_label = -1;  // -1 = untargeted
    double confidence = 0.0;
    double l2 = 0.0;
    std::vector<std::uint32_t> surrogate_ids;
    std::vector<double> perturbed;  // H*W*C pixels
};

struct Corpus {
    std::string scheme;
    std::string attack_kind = "cw_l2";
    Shape image_shape;  // {H,W,C}
    std::string manifest_hash;
    std::vector<CorpusRecord> records;
};

inline void save_corpus(const Corpus& corpus, const std::string& path) {
    json header;
    header["format"] = "advbench-corpus";
    header["scheme"] = corpus.scheme;
    header["attack_kind"] = corpus.attack_kind;
    header["image_shape"] = corpus.image_shape;
    header["manifest_hash"] = corpus.manifest_hash;
    header["count"] = corpus.records.size();

    std::vector<unsigned char> payload;
    for (const auto& rec : corpus.records) {
        bin::put_u32(payload, rec.original_index);
        bin::put_u32(payload, static_cast<std::uint32_t>(rec.true_label));
        bin::put_u32(payload, static_cast<std::uint32_t>(rec.target_label));
        bin::put_f64(payload, rec.confidence);
        bin::put_f64(payload, rec.l2);
        bin::put_u32(payload, static_cast<std::uint32_t>(rec.surrogate_ids.size()));
        for (auto id : rec.surrogate_ids) bin::put_u32(payload, id);
        bin::put_u32(payload, static_cast<std::uint32_t>(rec.perturbed.size()));
        for (double v : rec.perturbed) bin::put_f64(payload, v);
    }
    write_file_atomic(
        path, detail::seal_container(kCorpusMagic, kCorpusVersion, header, payload));
}

inline Corpus load_corpus(const std::string& path) {
    const auto buf = read_file(path);
    auto [header, r] = detail::open_container(buf, kCorpusMagic, kCorpusVersion, path);
    Corpus corpus;
    corpus.scheme = header.at("scheme");
    corpus.attack_kind = header.at("attack_kind");
    corpus.image_shape = header.at("image_shape").get<Shape>();
    corpus.manifest_hash = header.value("manifest_hash", "");
    const std::size_t count = header.at("count");
    corpus.records.resize(count);
    for (auto& rec : corpus.records) {
        rec.original_index = r.u32();
        rec.true_label = static_cast<std::int32_t>(r.u32());
        rec.target_label = static_cast<std::int32_t>(r.u32());
        rec.confidence = r.f64();
        rec.l2 = r.f64();
        rec.surrogate_ids.resize(r.u32());
        for (auto& id : rec.surrogate_ids) id = r.u32();
        rec.perturbed.resize(r.u32());
        for (auto& v : rec.perturbed) v = r.f64();
    }
    return corpus;
}

// ---- experiment manifests ---------------------------------------------------------

// Human-readable manifest tying a run's seed, config, dataset fingerprint and
// artifact paths together. Its hash is embedded into every artifact the run
// produces.
struct Manifest {
    std::uint64_t global_seed = 0;
    std::string command;
    std::uint64_t dataset_fingerprint = 0;
    json config = json::object();
    std::vector<std::string> artifacts;

    json to_json() const {
        json j;
        j["format"] = "advbench-manifest";
        j["version"] = 1;
        j["global_seed"] = global_seed;
        j["command"] = command;
        j["dataset_fingerprint"] = hex64(dataset_fingerprint);
        j["config"] = config;
        j["artifacts"] = artifacts;
        return j;
    }

    // Canonical content hash (nlohmann keeps keys sorted, so dump() is stable).
    std::string hash() const {
        Fnv1a h;
        h.update(to_json().dump());
        return hex64(h.digest());
    }
};

inline void save_manifest(const Manifest& m, const std::string& path) {
    write_file_atomic(path, m.to_json().dump(2) + "\n");
}

inline Manifest load_manifest(const std::string& path,
                              const Dataset* expect_data = nullptr) {
    const auto buf = read_file(path);
    json j;
    try {
        j = json::parse(buf.begin(), buf.end());
    } catch (const std::exception& e) {
        fail("manifest ", path, ": unreadable: ", e.what());
    }
    if (j.value("format", "") != "advbench-manifest")
        fail("manifest ", path, ": not an advbench manifest");
    if (j.value("version", 0) != 1)
        fail("manifest ", path, ": version ", j.value("version", 0),
             " unsupported; this build reads version 1");
    Manifest m;
    m.global_seed = j.at("global_seed");
    m.command = j.value("command", "");
    m.dataset_fingerprint = std::stoull(j.at("dataset_fingerprint").get<std::string>(),
                                        nullptr, 16);
    m.config = j.value("config", json::object());
    m.artifacts = j.value("artifacts", std::vector<std::string>{});
    if (expect_data && m.dataset_fingerprint != expect_data->fingerprint())
        fail("manifest ", path, ": dataset fingerprint ", hex64(m.dataset_fingerprint),
             " does not match loaded data ", hex64(expect_data->fingerprint()),
             "; load refused");
    return m;
}

}  // namespace advbench
