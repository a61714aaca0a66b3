#pragma once

// Per-epoch predictions on the unlabeled pool.
//
// Text format:
//   sslpoison-trace 1
//   epochs K
//   examples N
//   classes C
//   method <name>
//   seed <s>
//   then K*N lines in epoch-major order, each with C probabilities (9 significant digits).

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sslpoison/errors.hpp"
#include "sslpoison/nn/model.hpp"

namespace sslpoison::ssl {

struct PredictionTrace {
    int epochs = 0;
    int examples = 0;
    int classes = 0;
    std::string method;
    std::uint64_t seed = 0;
    /// Row-major [epoch][example][class].
    std::vector<double> values;

    PredictionTrace() = default;
    PredictionTrace(int k, int n, int c) : epochs(0), examples(n), classes(c) {
        values.reserve(static_cast<std::size_t>(k) * n * c);
    }

    double at(int epoch, int example, int cls) const {
        return values[(static_cast<std::size_t>(epoch) * examples + example) * classes + cls];
    }
    double& at(int epoch, int example, int cls) {
        return values[(static_cast<std::size_t>(epoch) * examples + example) * classes + cls];
    }

    /// Prediction vector f_epoch(u_example).
    nn::Vector prediction(int epoch, int example) const {
        nn::Vector v(classes);
        for (int c = 0; c < classes; ++c) v(c) = at(epoch, example, c);
        return v;
    }

    /// Appends one epoch given a C x N probability matrix.
    void append_epoch(const nn::Matrix& probs) {
        if (probs.rows() != classes || probs.cols() != examples) throw ShapeError("trace row has the wrong shape");
        for (Eigen::Index j = 0; j < probs.cols(); ++j)
            for (Eigen::Index c = 0; c < probs.rows(); ++c) values.push_back(probs(c, j));
        ++epochs;
    }

    bool operator==(const PredictionTrace&) const = default;
};

inline void write_trace(std::ostream& os, const PredictionTrace& t) {
    os << "sslpoison-trace 1\n"
       << "epochs " << t.epochs << "\nexamples " << t.examples << "\nclasses " << t.classes << "\nmethod "
       << (t.method.empty() ? "-" : t.method) << "\nseed " << t.seed << '\n';
    char buf[32];
    std::string line;
    for (int i = 0; i < t.epochs; ++i)
        for (int j = 0; j < t.examples; ++j) {
            line.clear();
            for (int c = 0; c < t.classes; ++c) {
                std::snprintf(buf, sizeof buf, c ? " %.9g" : "%.9g", t.at(i, j, c));
                line += buf;
            }
            line += '\n';
            os << line;
        }
}

inline PredictionTrace read_trace(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "sslpoison-trace 1") throw FormatError("not a sslpoison trace file");
    auto field = [&](const char* key) {
        if (!std::getline(is, line)) throw FormatError(std::string("missing ") + key);
        std::istringstream ls(line);
        std::string k, v;
        ls >> k >> v;
        if (k != key) throw FormatError(std::string("expected ") + key);
        return v;
    };
    PredictionTrace t;
    const int k = std::stoi(field("epochs"));
    t.examples = std::stoi(field("examples"));
    t.classes = std::stoi(field("classes"));
    t.method = field("method");
    t.seed = std::stoull(field("seed"));
    if (k < 0 || t.examples < 0 || t.classes <= 0) throw FormatError("bad trace dimensions");
    t.epochs = k;
    const std::size_t total = static_cast<std::size_t>(k) * t.examples * t.classes;
    t.values.resize(total);
    for (std::size_t r = 0; r < static_cast<std::size_t>(k) * t.examples; ++r) {
        if (!std::getline(is, line)) throw FormatError("trace truncated");
        const char* p = line.c_str();
        for (int c = 0; c < t.classes; ++c) {
            char* end = nullptr;
            t.values[r * t.classes + c] = std::strtod(p, &end);
            if (end == p) throw FormatError("malformed trace row " + std::to_string(r));
            p = end;
        }
    }
    return t;
}

inline void save_trace(const std::string& path, const PredictionTrace& t) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    write_trace(os, t);
}

inline PredictionTrace load_trace(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read " + path);
    return read_trace(is);
}

} // namespace sslpoison::ssl
