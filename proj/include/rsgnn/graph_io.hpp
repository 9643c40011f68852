#ifndef RSGNN_GRAPH_IO_HPP
#define RSGNN_GRAPH_IO_HPP

// Graph interchange directory:
//   nodes.csv  node_id,label,split,f0..f{d-1}
//   edges.csv  src,dst
//   meta.json  optional string map (num_classes, source, ...)
// Frame annotations for temporal graphs are JSON:
//   {"frames": [{"frame_id": int, "agents": [{"tube_uid": str,
//     "box": [4 reals], "action": [...], "location": [...], "label": int}]}]}

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "rsgnn/errors.hpp"
#include "rsgnn/graph.hpp"

namespace rsgnn {

namespace fs = std::filesystem;

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double x) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, end);
}

inline double parse_double(std::string_view s, const std::string& where) {
    double x = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || end != s.data() + s.size()) throw DataError(where + ": bad number '" + std::string(s) + "'");
    return x;
}

inline long parse_long(std::string_view s, const std::string& where) {
    long x = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc{} || end != s.data() + s.size()) throw DataError(where + ": bad integer '" + std::string(s) + "'");
    return x;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw DataError("cannot write " + p.string());
    return os;
}

inline std::ifstream open_in(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw DataError("cannot read " + p.string());
    return is;
}

inline void write_graph(const fs::path& dir, const NodeGraph& g) {
    g.validate();
    fs::create_directories(dir);
    {
        auto os = open_out(dir / "nodes.csv");
        os << "node_id,label,split";
        for (std::size_t j = 0; j < g.feature_dim(); ++j) os << ",f" << j;
        os << '\n';
        for (std::size_t v = 0; v < g.num_nodes(); ++v) {
            os << v << ',' << g.labels[v] << ',' << to_string(g.split[v]);
            for (double x : g.features.row(v)) os << ',' << format_double(x);
            os << '\n';
        }
    }
    {
        auto os = open_out(dir / "edges.csv");
        os << "src,dst\n";
        for (const auto& e : g.edges) os << e.src << ',' << e.dst << '\n';
    }
    auto os = open_out(dir / "meta.json");
    os << nlohmann::ordered_json(g.metadata).dump(2) << '\n';
}

inline NodeGraph read_graph(const fs::path& dir) {
    NodeGraph g;
    std::vector<std::vector<double>> rows;
    {
        auto is = open_in(dir / "nodes.csv");
        std::string line;
        if (!std::getline(is, line)) throw DataError("nodes.csv: empty file");
        const auto header = split_csv(line);
        if (header.size() < 3 || header[0] != "node_id" || header[1] != "label" || header[2] != "split")
            throw DataError("nodes.csv: header must start with node_id,label,split");
        const std::size_t d = header.size() - 3;
        std::size_t lineno = 1;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string where = "nodes.csv:" + std::to_string(lineno);
            const auto cells = split_csv(line);
            if (cells.size() != header.size()) throw DataError(where + ": wrong number of columns");
            if (parse_long(cells[0], where) != static_cast<long>(g.labels.size()))
                throw DataError(where + ": node ids must be 0..N-1 in order");
            g.labels.push_back(static_cast<int>(parse_long(cells[1], where)));
            g.split.push_back(parse_split(std::string(cells[2])));
            std::vector<double> f(d);
            for (std::size_t j = 0; j < d; ++j) f[j] = parse_double(cells[3 + j], where);
            rows.push_back(std::move(f));
        }
        g.features = Matrix(rows.size(), d);
        for (std::size_t v = 0; v < rows.size(); ++v)
            for (std::size_t j = 0; j < d; ++j) g.features(v, j) = rows[v][j];
    }
    {
        auto is = open_in(dir / "edges.csv");
        std::string line;
        if (!std::getline(is, line) || line != "src,dst") throw DataError("edges.csv: header must be src,dst");
        std::size_t lineno = 1;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string where = "edges.csv:" + std::to_string(lineno);
            const auto cells = split_csv(line);
            if (cells.size() != 2) throw DataError(where + ": expected src,dst");
            g.edges.push_back({static_cast<int>(parse_long(cells[0], where)), static_cast<int>(parse_long(cells[1], where))});
        }
    }
    if (fs::exists(dir / "meta.json")) {
        auto is = open_in(dir / "meta.json");
        try {
            const auto j = nlohmann::json::parse(is);
            for (const auto& [k, v] : j.items()) g.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("meta.json: ") + e.what());
        }
    }
    g.validate();
    return g;
}

inline std::vector<FrameAnnotation> frames_from_json(const nlohmann::json& j) {
    std::vector<FrameAnnotation> frames;
    try {
        for (const auto& jf : j.at("frames")) {
            FrameAnnotation f;
            f.frame_id = jf.at("frame_id").get<int>();
            for (const auto& ja : jf.at("agents")) {
                AgentAnnotation a;
                a.tube_uid = ja.at("tube_uid").get<std::string>();
                const auto box = ja.at("box").get<std::vector<double>>();
                if (box.size() != 4) throw DataError("agent box must have 4 coordinates");
                std::copy(box.begin(), box.end(), a.box.begin());
                a.action_onehot = ja.value("action", std::vector<double>{});
                a.location_onehot = ja.value("location", std::vector<double>{});
                a.class_label = ja.value("label", kUnlabeled);
                f.agents.push_back(std::move(a));
            }
            frames.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("frame annotations: ") + e.what());
    }
    return frames;
}

/// Reads {"frames": [...]} from a JSON file.
inline std::vector<FrameAnnotation> read_frames(const fs::path& path) {
    auto is = open_in(path);
    try {
        return frames_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("frame annotations: ") + e.what());
    }
}

}  // namespace rsgnn

#endif  // RSGNN_GRAPH_IO_HPP
