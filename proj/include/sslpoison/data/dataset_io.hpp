#pragma once

// Line-oriented dataset text format:
//
//   sslpoison-dataset 1
//   kind two-moons
//   dim 2
//   classes 2
//   counts labeled 40 unlabeled 5000 poison 25 test 1000
//   seed 1
//   <split> <f_1> ... <f_d> <label|->
//   ...
//
// <split> is one of labeled, unlabeled, poison, test. Unlabeled and poison
// lines form the unlabeled pool in file order. Features are written with 17
// significant digits so a bundle round-trips bit-exactly.

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "sslpoison/data/dataset.hpp"

namespace sslpoison::data {

namespace detail {

inline void write_example(std::ostream& os, const char* split, const Example& e) {
    os << split;
    char buf[32];
    for (Eigen::Index k = 0; k < e.features.size(); ++k) {
        std::snprintf(buf, sizeof buf, " %.17g", e.features(k));
        os << buf;
    }
    if (e.label)
        os << ' ' << *e.label << '\n';
    else
        os << " -\n";
}

inline std::string expect_key(std::istream& is, const char* key) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError(std::string("missing '") + key + "' line");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw FormatError(std::string("expected '") + key + "', got '" + k + "'");
    std::string rest;
    std::getline(ls, rest);
    const auto first = rest.find_first_not_of(' ');
    return first == std::string::npos ? std::string() : rest.substr(first);
}

} // namespace detail

inline void write_dataset(std::ostream& os, const DatasetBundle& b) {
    const auto n_poison = b.poison_indices().size();
    os << "sslpoison-dataset 1\n";
    os << "kind " << b.kind << '\n';
    os << "dim " << b.dim << '\n';
    os << "classes " << b.num_classes << '\n';
    os << "counts labeled " << b.labeled.size() << " unlabeled " << b.unlabeled.size() - n_poison << " poison "
       << n_poison << " test " << b.test.size() << '\n';
    os << "seed " << b.seed << '\n';
    for (const auto& e : b.labeled) detail::write_example(os, "labeled", e);
    for (std::size_t i = 0; i < b.unlabeled.size(); ++i)
        detail::write_example(os, i < b.poison.size() && b.poison[i] ? "poison" : "unlabeled", b.unlabeled[i]);
    for (const auto& e : b.test) detail::write_example(os, "test", e);
}

inline DatasetBundle read_dataset(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "sslpoison-dataset 1") throw FormatError("not a sslpoison dataset file");
    DatasetBundle b;
    b.kind = detail::expect_key(is, "kind");
    b.dim = std::stoi(detail::expect_key(is, "dim"));
    b.num_classes = std::stoi(detail::expect_key(is, "classes"));
    std::size_t n_lab = 0, n_unl = 0, n_poi = 0, n_test = 0;
    {
        std::istringstream cs(detail::expect_key(is, "counts"));
        std::string a, c, e, g;
        cs >> a >> n_lab >> c >> n_unl >> e >> n_poi >> g >> n_test;
        if (!cs || a != "labeled" || c != "unlabeled" || e != "poison" || g != "test")
            throw FormatError("malformed counts line");
    }
    b.seed = std::stoull(detail::expect_key(is, "seed"));
    if (b.dim <= 0 || b.num_classes <= 0) throw FormatError("dim and classes must be positive");

    std::size_t lineno = 6;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string split;
        ls >> split;
        Example ex;
        ex.features.resize(b.dim);
        for (int k = 0; k < b.dim; ++k) {
            std::string tok;
            if (!(ls >> tok)) throw FormatError("line " + std::to_string(lineno) + ": too few features");
            ex.features(k) = std::strtod(tok.c_str(), nullptr);
        }
        std::string lab;
        if (!(ls >> lab)) throw FormatError("line " + std::to_string(lineno) + ": missing label");
        if (lab != "-") {
            const int y = std::stoi(lab);
            if (y < 0 || y >= b.num_classes) throw FormatError("line " + std::to_string(lineno) + ": label out of range");
            ex.label = y;
        }
        if (split == "labeled") {
            if (!ex.label) throw FormatError("line " + std::to_string(lineno) + ": labeled example without label");
            b.labeled.push_back(std::move(ex));
        } else if (split == "unlabeled" || split == "poison") {
            b.unlabeled.push_back(std::move(ex));
            b.poison.push_back(split == "poison");
        } else if (split == "test") {
            b.test.push_back(std::move(ex));
        } else {
            throw FormatError("line " + std::to_string(lineno) + ": unknown split '" + split + "'");
        }
    }
    if (b.labeled.size() != n_lab || b.unlabeled.size() != n_unl + n_poi || b.test.size() != n_test)
        throw FormatError("example counts disagree with header");
    return b;
}

inline void save_dataset(const std::string& path, const DatasetBundle& b) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    write_dataset(os, b);
}

inline DatasetBundle load_dataset(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read " + path);
    return read_dataset(is);
}

} // namespace sslpoison::data
