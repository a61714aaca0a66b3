#pragma once

// Plain-text model checkpoints:
//
//   sslpoison-model 1
//   layers L
//   layer <out> <in> <activation>
//   <out rows of `in` weights>
//   <one row of `out` biases>
//   ...
//
// Values are written with 17 significant digits, so a round trip is exact.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "sslpoison/errors.hpp"
#include "sslpoison/nn/model.hpp"

namespace sslpoison::nn {

inline void write_model(std::ostream& os, const ModelParams& m) {
    os << "sslpoison-model 1\nlayers " << m.layers.size() << '\n';
    char buf[32];
    auto row = [&](auto&& values, Eigen::Index n) {
        std::string line;
        for (Eigen::Index k = 0; k < n; ++k) {
            std::snprintf(buf, sizeof buf, k ? " %.17g" : "%.17g", values(k));
            line += buf;
        }
        os << line << '\n';
    };
    for (const auto& l : m.layers) {
        os << "layer " << l.weight.rows() << ' ' << l.weight.cols() << ' ' << to_string(l.activation) << '\n';
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) row(l.weight.row(r), l.weight.cols());
        row(l.bias, l.bias.size());
    }
}

inline ModelParams read_model(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "sslpoison-model 1") throw FormatError("not a sslpoison model file");
    std::string key;
    std::size_t count = 0;
    if (!std::getline(is, line)) throw FormatError("missing layer count");
    std::istringstream(line) >> key >> count;
    if (key != "layers" || count == 0) throw FormatError("bad layer count");
    auto read_row = [&](auto& dst, Eigen::Index n) {
        if (!std::getline(is, line)) throw FormatError("model truncated");
        const char* p = line.c_str();
        for (Eigen::Index k = 0; k < n; ++k) {
            char* end = nullptr;
            dst(k) = std::strtod(p, &end);
            if (end == p) throw FormatError("malformed model row");
            p = end;
        }
    };
    ModelParams m;
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(is, line)) throw FormatError("model truncated");
        std::istringstream ls(line);
        Eigen::Index out = 0, in = 0;
        std::string act;
        ls >> key >> out >> in >> act;
        if (key != "layer" || out <= 0 || in <= 0) throw FormatError("bad layer header");
        Layer l;
        l.activation = activation_from_string(act);
        l.weight.resize(out, in);
        l.bias.resize(out);
        for (Eigen::Index r = 0; r < out; ++r) {
            Vector tmp(in);
            read_row(tmp, in);
            l.weight.row(r) = tmp.transpose();
        }
        read_row(l.bias, out);
        m.layers.push_back(std::move(l));
    }
    if (!m.well_formed()) throw FormatError("layer sizes do not chain");
    return m;
}

inline void save_model(const std::string& path, const ModelParams& m) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    write_model(os, m);
}

inline ModelParams load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read " + path);
    return read_model(is);
}

} // namespace sslpoison::nn
