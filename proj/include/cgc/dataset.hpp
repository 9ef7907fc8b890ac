#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cgc/errors.hpp"
#include "cgc/matrix.hpp"

namespace cgc {

// Undirected graph with continuous node attributes. The adjacency is kept
// binary, symmetric and zero-diagonal; self-loops are only introduced
// later inside encoder normalization.
struct Graph {
    Matrix adjacency;   // {0,1}^(N x N)
    Matrix features;    // R^(N x h)
    int label = 0;      // contiguous class id in [0, C)
    std::size_t num_nodes = 0;
};

struct GraphDataset {
    std::vector<Graph> graphs;
    int num_classes = 0;
    std::size_t feature_dim = 0;
    std::string name;
};

struct DatasetStats {
    std::size_t num_graphs = 0;
    double avg_nodes = 0.0;
    double avg_edges = 0.0; // undirected edges counted once
    std::size_t feature_dim = 0;
    int num_classes = 0;
};

inline std::size_t count_undirected_edges(const Matrix& adjacency) {
    std::size_t twice = 0;
    for (std::size_t i = 0; i < adjacency.rows(); ++i)
        for (std::size_t j = 0; j < adjacency.cols(); ++j)
            if (adjacency(i, j) != 0.0) ++twice;
    return twice / 2;
}

inline void validate_graph(const Graph& g, const std::string& where) {
    if (g.adjacency.rows() != g.adjacency.cols())
        throw ShapeError(where + ": adjacency not square");
    if (g.adjacency.rows() != g.num_nodes)
        throw ShapeError(where + ": num_nodes mismatch");
    if (g.features.rows() != g.num_nodes)
        throw ShapeError(where + ": feature rows != num_nodes");
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        if (g.adjacency(i, i) != 0.0) throw ShapeError(where + ": nonzero diagonal");
        for (std::size_t j = 0; j < g.num_nodes; ++j) {
            const double a = g.adjacency(i, j);
            if (a != 0.0 && a != 1.0) throw ShapeError(where + ": non-binary adjacency entry");
            if (a != g.adjacency(j, i)) throw ShapeError(where + ": asymmetric adjacency");
        }
    }
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> read_lines(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw FormatError("missing " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline double parse_real(const std::string& tok, const std::filesystem::path& file, std::size_t lineno) {
    const std::string t = trim(tok);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size())
        throw FormatError("parse " + file.filename().string() + ":" + std::to_string(lineno) +
                          ": non-numeric value '" + tok + "'");
    return v;
}

inline long parse_int(const std::string& tok, const std::filesystem::path& file, std::size_t lineno) {
    const std::string t = trim(tok);
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw FormatError("parse " + file.filename().string() + ":" + std::to_string(lineno) +
                          ": non-integer value '" + tok + "'");
    return v;
}

inline std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}

} // namespace detail

// Parses the four-file TUDataset text layout rooted at data_dir/dataset_name.
// Edge lines are treated as directed pairs and symmetrized by union;
// self-loops are dropped; ids are 1-indexed on disk, 0-indexed in memory;
// labels are remapped to a contiguous [0, C) by ascending original value.
inline GraphDataset parse_tudataset(const std::filesystem::path& data_dir,
                                    const std::string& dataset_name) {
    namespace fs = std::filesystem;
    const fs::path root = data_dir / dataset_name;
    const fs::path f_edges = root / (dataset_name + "_A.txt");
    const fs::path f_indicator = root / (dataset_name + "_graph_indicator.txt");
    const fs::path f_labels = root / (dataset_name + "_graph_labels.txt");
    const fs::path f_attrs = root / (dataset_name + "_node_attributes.txt");

    const auto indicator_lines = detail::read_lines(f_indicator);
    const std::size_t num_nodes = indicator_lines.size();
    if (num_nodes == 0) throw FormatError("parse " + f_indicator.string() + ": no nodes");

    std::vector<long> graph_of_node(num_nodes);
    long num_graphs = 0;
    for (std::size_t i = 0; i < num_nodes; ++i) {
        const long g = detail::parse_int(indicator_lines[i], f_indicator, i + 1);
        if (g < 1) throw FormatError("parse " + f_indicator.string() + ": graph id < 1");
        graph_of_node[i] = g - 1;
        num_graphs = std::max(num_graphs, g);
    }

    // Local node index = order of appearance within its graph.
    std::vector<std::size_t> local_index(num_nodes);
    std::vector<std::size_t> nodes_per_graph(num_graphs, 0);
    for (std::size_t i = 0; i < num_nodes; ++i)
        local_index[i] = nodes_per_graph[graph_of_node[i]]++;
    for (long g = 0; g < num_graphs; ++g)
        if (nodes_per_graph[g] == 0)
            throw FormatError("indicator mismatch: graph " + std::to_string(g + 1) + " has no nodes");

    const auto label_lines = detail::read_lines(f_labels);
    if (label_lines.size() != static_cast<std::size_t>(num_graphs))
        throw FormatError("parse " + f_labels.string() + ": " + std::to_string(label_lines.size()) +
                          " labels for " + std::to_string(num_graphs) + " graphs");
    std::vector<long> raw_labels(num_graphs);
    for (long g = 0; g < num_graphs; ++g)
        raw_labels[g] = detail::parse_int(label_lines[g], f_labels, g + 1);

    // Attribute and edge files can be large (hundreds of MB for the wider
    // corpora), so they are streamed line by line.
    GraphDataset ds;
    ds.name = dataset_name;
    std::size_t feature_dim = 0;
    {
        std::ifstream in(f_attrs);
        if (!in) throw FormatError("missing " + f_attrs.string());
        std::string line;
        std::size_t lineno = 0, node = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = detail::trim(line);
            if (line.empty()) continue;
            if (node >= num_nodes)
                throw FormatError("parse " + f_attrs.string() + ": more attribute rows than nodes");
            const auto toks = detail::split_commas(line);
            if (node == 0) {
                feature_dim = toks.size();
                ds.feature_dim = feature_dim;
                ds.graphs.resize(num_graphs);
                for (long g = 0; g < num_graphs; ++g) {
                    const std::size_t n = nodes_per_graph[g];
                    ds.graphs[g].adjacency = Matrix(n, n);
                    ds.graphs[g].features = Matrix(n, feature_dim);
                    ds.graphs[g].num_nodes = n;
                }
            }
            if (toks.size() != feature_dim)
                throw FormatError("parse " + f_attrs.string() + ":" + std::to_string(lineno) +
                                  ": inconsistent attribute dimension");
            Graph& g = ds.graphs[graph_of_node[node]];
            for (std::size_t j = 0; j < feature_dim; ++j)
                g.features(local_index[node], j) = detail::parse_real(toks[j], f_attrs, lineno);
            ++node;
        }
        if (node != num_nodes)
            throw FormatError("parse " + f_attrs.string() + ": " + std::to_string(node) +
                              " attribute rows for " + std::to_string(num_nodes) + " nodes");
    }

    {
        std::ifstream in(f_edges);
        if (!in) throw FormatError("missing " + f_edges.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto toks = detail::split_commas(line);
            if (toks.size() != 2)
                throw FormatError("parse " + f_edges.string() + ":" + std::to_string(lineno) +
                                  ": expected 'i, j'");
            const long u = detail::parse_int(toks[0], f_edges, lineno);
            const long v = detail::parse_int(toks[1], f_edges, lineno);
            if (u < 1 || v < 1 || u > static_cast<long>(num_nodes) ||
                v > static_cast<long>(num_nodes))
                throw FormatError("indicator mismatch: edge (" + std::to_string(u) + ", " +
                                  std::to_string(v) + ") references missing node");
            const std::size_t ui = static_cast<std::size_t>(u - 1);
            const std::size_t vi = static_cast<std::size_t>(v - 1);
            if (graph_of_node[ui] != graph_of_node[vi])
                throw FormatError("indicator mismatch: edge (" + std::to_string(u) + ", " +
                                  std::to_string(v) + ") crosses graphs");
            if (ui == vi) continue; // drop self-loops
            Graph& g = ds.graphs[graph_of_node[ui]];
            g.adjacency(local_index[ui], local_index[vi]) = 1.0;
            g.adjacency(local_index[vi], local_index[ui]) = 1.0;
        }
    }

    // Remap labels to [0, C) by ascending original value.
    std::map<long, int> remap;
    for (long l : raw_labels) remap.emplace(l, 0);
    int next = 0;
    for (auto& kv : remap) kv.second = next++;
    ds.num_classes = next;
    for (long g = 0; g < num_graphs; ++g) ds.graphs[g].label = remap[raw_labels[g]];

    return ds;
}

inline DatasetStats dataset_stats(const GraphDataset& ds) {
    if (ds.graphs.empty()) throw EmptyDatasetError("dataset_stats: empty dataset " + ds.name);
    DatasetStats st;
    st.num_graphs = ds.graphs.size();
    st.feature_dim = ds.feature_dim;
    st.num_classes = ds.num_classes;
    double nodes = 0.0, edges = 0.0;
    for (const Graph& g : ds.graphs) {
        nodes += double(g.num_nodes);
        edges += double(count_undirected_edges(g.adjacency));
    }
    st.avg_nodes = nodes / double(st.num_graphs);
    st.avg_edges = edges / double(st.num_graphs);
    return st;
}

// Serializes a dataset back into the same four-file layout (used for the
// round-trip property and for exporting generated negatives).
inline void write_tudataset(const GraphDataset& ds, const std::filesystem::path& data_dir,
                            const std::string& dataset_name) {
    namespace fs = std::filesystem;
    const fs::path root = data_dir / dataset_name;
    fs::create_directories(root);

    std::ofstream edges(root / (dataset_name + "_A.txt"));
    std::ofstream indicator(root / (dataset_name + "_graph_indicator.txt"));
    std::ofstream labels(root / (dataset_name + "_graph_labels.txt"));
    std::ofstream attrs(root / (dataset_name + "_node_attributes.txt"));

    char buf[64];
    std::size_t node_base = 1; // 1-indexed global ids
    for (std::size_t gi = 0; gi < ds.graphs.size(); ++gi) {
        const Graph& g = ds.graphs[gi];
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            indicator << (gi + 1) << "\n";
            for (std::size_t j = 0; j < g.features.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", g.features(i, j));
                attrs << (j ? ", " : "") << buf;
            }
            attrs << "\n";
            for (std::size_t j = 0; j < g.num_nodes; ++j)
                if (g.adjacency(i, j) != 0.0)
                    edges << (node_base + i) << ", " << (node_base + j) << "\n";
        }
        labels << g.label << "\n";
        node_base += g.num_nodes;
    }
}

} // namespace cgc
