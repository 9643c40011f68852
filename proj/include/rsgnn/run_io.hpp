#ifndef RSGNN_RUN_IO_HPP
#define RSGNN_RUN_IO_HPP

// Run directory:
//   config.json     resolved TrainConfig plus data dimensions
//   family.txt      focal family (rsgnn runs)
//   checkpoint.bin  parameter tensors
//   trace.csv       epoch,train_loss,val_acc
//
// checkpoint.bin, format version 1, little-endian:
//   "RSGNNCKP" | u32 version | u32 tensor_count |
//   tensor_count x (u32 name_len | name | u64 rows | u64 cols | rows*cols f64)

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsgnn/graph_io.hpp"
#include "rsgnn/training.hpp"

namespace rsgnn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'R', 'S', 'G', 'N', 'N', 'C', 'K', 'P'};
inline constexpr int kConfigFormatVersion = 1;

// ---------------------------------------------------------------------------
// Config <-> JSON
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const LossConfig& c) {
    return {{"alpha", c.alpha},
            {"beta", c.beta},
            {"norm_penalty", to_string(c.norm_penalty)},
            {"label_smoothing", c.label_smoothing},
            {"class_weights", c.class_weights}};
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
    return {{"model", to_string(c.model)},
            {"seed", c.seed},
            {"epochs", c.epochs},
            {"warmup_epochs", c.warmup_epochs},
            {"lr", c.lr},
            {"optimizer", to_string(c.optimizer)},
            {"hidden", c.hidden},
            {"heads", c.heads},
            {"dropout", c.dropout},
            {"ood_classes", std::vector<int>(c.ood_classes.begin(), c.ood_classes.end())},
            {"budget", c.budget},
            {"max_card", c.max_card},
            {"full_power_set", c.full_power_set},
            {"loss", to_json(c.loss)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    try {
        TrainConfig c;
        c.model = parse_model_kind(j.at("model").get<std::string>());
        c.seed = j.at("seed").get<std::uint64_t>();
        c.epochs = j.at("epochs").get<int>();
        c.warmup_epochs = j.at("warmup_epochs").get<int>();
        c.lr = j.at("lr").get<double>();
        c.optimizer = parse_optimizer(j.value("optimizer", std::string("gd")));
        c.hidden = j.at("hidden").get<std::size_t>();
        c.heads = j.value("heads", std::size_t{4});
        c.dropout = j.at("dropout").get<double>();
        const auto ood = j.at("ood_classes").get<std::vector<int>>();
        c.ood_classes = std::set<int>(ood.begin(), ood.end());
        c.budget = j.at("budget").get<int>();
        c.max_card = j.at("max_card").get<int>();
        c.full_power_set = j.at("full_power_set").get<bool>();
        const auto& l = j.at("loss");
        c.loss.alpha = l.at("alpha").get<double>();
        c.loss.beta = l.at("beta").get<double>();
        c.loss.norm_penalty = parse_norm_penalty(l.at("norm_penalty").get<std::string>());
        c.loss.label_smoothing = l.at("label_smoothing").get<double>();
        c.loss.class_weights = l.value("class_weights", std::vector<double>{});
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config.json: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("config.json: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("checkpoint truncated");
    return v;
}
}  // namespace detail

inline void save_checkpoint(const fs::path& path, Model& model) {
    auto os = open_out(path);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const auto params = model.params();
    detail::write_pod<std::uint32_t>(os, kCheckpointVersion);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const auto* p : params) {
        detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        detail::write_pod<std::uint64_t>(os, p->value.rows());
        detail::write_pod<std::uint64_t>(os, p->value.cols());
        const auto v = p->value.values();
        os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!os) throw DataError("failed writing " + path.string());
}

/// Fills an already-shaped model; every tensor must match by name and shape.
inline void load_checkpoint(const fs::path& path, Model& model) {
    auto is = open_in(path);
    char magic[sizeof(kCheckpointMagic)];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw DataError(path.string() + ": not a checkpoint file");
    const auto version = detail::read_pod<std::uint32_t>(is);
    if (version != kCheckpointVersion) throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    std::map<std::string, Param*> by_name;
    for (auto* p : model.params()) by_name[p->name] = p;
    const auto n = detail::read_pod<std::uint32_t>(is);
    if (n != by_name.size()) throw DataError(path.string() + ": tensor count does not match the model");
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto len = detail::read_pod<std::uint32_t>(is);
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw DataError("checkpoint truncated");
        const auto rows = detail::read_pod<std::uint64_t>(is);
        const auto cols = detail::read_pod<std::uint64_t>(is);
        auto it = by_name.find(name);
        if (it == by_name.end()) throw DataError(path.string() + ": unexpected tensor '" + name + "'");
        Matrix& dst = it->second->value;
        if (dst.rows() != rows || dst.cols() != cols) throw DataError(path.string() + ": shape mismatch for '" + name + "'");
        auto v = dst.values();
        if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double))))
            throw DataError("checkpoint truncated");
    }
}

// ---------------------------------------------------------------------------
// Run directories
// ---------------------------------------------------------------------------

inline void write_trace(const fs::path& path, const std::vector<TraceRow>& trace) {
    auto os = open_out(path);
    os << "epoch,train_loss,val_acc\n";
    for (const auto& r : trace) os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_acc) << '\n';
}

inline void write_run(const fs::path& dir, const TrainConfig& cfg, TrainResult& result, std::size_t in_dim) {
    fs::create_directories(dir);
    Model& m = result.model;
    auto j = to_json(cfg);
    j["data"] = {{"num_classes", m.num_classes}, {"in_dim", in_dim}, {"id_classes", m.classes.to_original}};
    j["format_version"] = kConfigFormatVersion;
    {
        auto os = open_out(dir / "config.json");
        os << j.dump(2) << '\n';
    }
    if (m.kind == ModelKind::rsgnn) {
        auto os = open_out(dir / "family.txt");
        write_family(os, m.family);
    }
    save_checkpoint(dir / "checkpoint.bin", m);
    write_trace(dir / "trace.csv", result.trace);
}

struct LoadedRun {
    TrainConfig config;
    Model model;
};

inline LoadedRun load_run(const fs::path& dir) {
    nlohmann::json j;
    {
        auto is = open_in(dir / "config.json");
        try {
            j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("config.json: ") + e.what());
        }
    }
    LoadedRun run;
    run.config = train_config_from_json(j);
    std::size_t in_dim = 0;
    std::vector<int> id_classes;
    try {
        const auto& d = j.at("data");
        run.model.num_classes = d.at("num_classes").get<int>();
        in_dim = d.at("in_dim").get<std::size_t>();
        id_classes = d.at("id_classes").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config.json: ") + e.what());
    }
    Model& m = run.model;
    m.kind = run.config.model;
    OodSplit split;
    split.id_classes = std::set<int>(id_classes.begin(), id_classes.end());
    split.ood_classes = run.config.ood_classes;
    m.classes = ClassMapping::from_split(split, m.num_classes);
    m.encoder = make_encoder(run.config, in_dim);
    const auto c_local = static_cast<std::size_t>(m.classes.num_local());
    if (m.kind == ModelKind::vanilla) {
        m.vanilla = VanillaHead(run.config.hidden, c_local, 0);
    } else {
        auto is = open_in(dir / "family.txt");
        m.family = read_family(is);
        if (static_cast<std::size_t>(m.family.num_classes()) != c_local)
            throw DataError("family.txt universe does not match the ID classes");
        m.belief = BeliefHead(run.config.hidden, run.config.hidden, m.family.size(), 0);
    }
    load_checkpoint(dir / "checkpoint.bin", m);
    return run;
}

}  // namespace rsgnn

#endif  // RSGNN_RUN_IO_HPP
