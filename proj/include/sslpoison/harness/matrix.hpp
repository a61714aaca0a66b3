#pragma once

// Grids of trials aggregated into "successes/trials" tables.
//
// Matrix config (JSON):
//   {
//     "base":  { ...trial config... },
//     "rows":  {"key": "trainer.method", "values": ["pseudo-label", "fixmatch-like"]},
//     "cols":  {"key": "attack.budget",  "values": [5, 25]},      (optional)
//     "seeds": 8, "seed0": 0, "parallelism": 1, "output_dir": "runs/table1"
//   }
// Every cell runs the same seeds, so rows and columns share their images.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sslpoison/harness/config.hpp"
#include "sslpoison/harness/trial.hpp"

namespace sslpoison::harness {

struct MatrixCell {
    std::string row;
    std::string col;
    std::vector<TrialConfig> trials;
};

struct CellOutcome {
    std::string row;
    std::string col;
    int trials = 0;
    int successes = 0;
    int misclassified = 0;
    double mean_accuracy = 0.0;  // over completed trials
    std::vector<std::string> errors;
    std::vector<TrialResult> results;  // completed trials, in seed order

    std::string ratio() const { return std::to_string(successes) + "/" + std::to_string(trials); }
};

struct MatrixTable {
    std::string row_key;
    std::string col_key;
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<CellOutcome> cells;  // row-major

    const CellOutcome& at(std::size_t r, std::size_t c) const { return cells[r * cols.size() + c]; }
};

struct MatrixSpec {
    json base = json::object();
    std::string row_key;
    std::vector<json> row_values;
    std::string col_key;
    std::vector<json> col_values;
    int seeds = 8;
    std::uint64_t seed0 = 0;
    int parallelism = 1;
    std::string output_dir;
};

inline std::string label_of(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

inline MatrixSpec matrix_from_json(const json& j) {
    detail::check_keys(j, "matrix", {"base", "rows", "cols", "seeds", "seed0", "parallelism", "output_dir"});
    MatrixSpec m;
    if (j.contains("base")) m.base = j["base"];
    auto axis = [&](const char* name, std::string& key, std::vector<json>& values) {
        if (!j.contains(name)) return;
        const json& a = j[name];
        detail::check_keys(a, name, {"key", "values"});
        key = a.at("key").get<std::string>();
        for (const auto& v : a.at("values")) values.push_back(v);
        if (values.empty()) throw ConfigError(std::string(name) + " needs at least one value");
    };
    axis("rows", m.row_key, m.row_values);
    axis("cols", m.col_key, m.col_values);
    detail::get(j, "seeds", m.seeds);
    detail::get(j, "seed0", m.seed0);
    detail::get(j, "parallelism", m.parallelism);
    detail::get(j, "output_dir", m.output_dir);
    if (m.seeds < 1) throw ConfigError("seeds must be positive");
    return m;
}

/// Expands the spec into cells (one row / column when an axis is missing).
inline std::vector<MatrixCell> expand(const MatrixSpec& m) {
    const std::vector<json> rows = m.row_values.empty() ? std::vector<json>{json("all")} : m.row_values;
    const std::vector<json> cols = m.col_values.empty() ? std::vector<json>{json("all")} : m.col_values;
    std::vector<MatrixCell> cells;
    for (const auto& rv : rows)
        for (const auto& cv : cols) {
            MatrixCell cell{label_of(rv), label_of(cv), {}};
            json j = m.base;
            if (!m.row_key.empty()) set_path(j, m.row_key, rv);
            if (!m.col_key.empty()) set_path(j, m.col_key, cv);
            for (int s = 0; s < m.seeds; ++s) {
                TrialConfig c = trial_from_json(j);
                c.seed = m.seed0 + static_cast<std::uint64_t>(s);
                c.name = cell.row + "|" + cell.col;
                if (!m.output_dir.empty())
                    c.output_dir = (std::filesystem::path(m.output_dir) / (cell.row + "__" + cell.col) /
                                    ("seed" + std::to_string(c.seed)))
                                       .string();
                cell.trials.push_back(std::move(c));
            }
            cells.push_back(std::move(cell));
        }
    return cells;
}

/// Runs every trial on up to `parallelism` workers. A failing trial is recorded
/// in its cell and counted as a trial without success; the matrix continues.
inline MatrixTable run_matrix(const std::vector<MatrixCell>& grid, int parallelism = 1) {
    if (grid.empty()) throw ContractError("empty matrix");
    struct Job {
        std::size_t cell;
        std::size_t trial;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < grid.size(); ++c)
        for (std::size_t t = 0; t < grid[c].trials.size(); ++t) jobs.push_back({c, t});
    std::vector<std::optional<TrialResult>> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                results[i] = run_trial(grid[jobs[i].cell].trials[jobs[i].trial]);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(jobs.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    MatrixTable table;
    for (const auto& cell : grid) {
        if (std::find(table.rows.begin(), table.rows.end(), cell.row) == table.rows.end()) table.rows.push_back(cell.row);
        if (std::find(table.cols.begin(), table.cols.end(), cell.col) == table.cols.end()) table.cols.push_back(cell.col);
    }
    table.cells.resize(table.rows.size() * table.cols.size());
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const auto r = static_cast<std::size_t>(
            std::find(table.rows.begin(), table.rows.end(), grid[c].row) - table.rows.begin());
        const auto k = static_cast<std::size_t>(
            std::find(table.cols.begin(), table.cols.end(), grid[c].col) - table.cols.begin());
        CellOutcome& out = table.cells[r * table.cols.size() + k];
        out.row = grid[c].row;
        out.col = grid[c].col;
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& cell = grid[jobs[i].cell];
        const auto r = static_cast<std::size_t>(std::find(table.rows.begin(), table.rows.end(), cell.row) - table.rows.begin());
        const auto k = static_cast<std::size_t>(std::find(table.cols.begin(), table.cols.end(), cell.col) - table.cols.begin());
        CellOutcome& out = table.cells[r * table.cols.size() + k];
        ++out.trials;
        if (results[i]) {
            out.successes += results[i]->attack_success;
            out.misclassified += results[i]->misclassified;
            out.mean_accuracy += results[i]->test_accuracy;
            out.results.push_back(*results[i]);
        } else {
            out.errors.push_back("seed " + std::to_string(cell.trials[jobs[i].trial].seed) + ": " + errors[i]);
        }
    }
    for (auto& c : table.cells)
        if (!c.results.empty()) c.mean_accuracy /= static_cast<double>(c.results.size());
    return table;
}

inline MatrixTable run_matrix(const MatrixSpec& m) {
    MatrixTable t = run_matrix(expand(m), m.parallelism);
    t.row_key = m.row_key;
    t.col_key = m.col_key;
    return t;
}

/// Aligned text table of success ratios.
inline void write_table(std::ostream& os, const MatrixTable& t) {
    std::size_t w0 = std::max<std::size_t>(t.row_key.size(), 4);
    for (const auto& r : t.rows) w0 = std::max(w0, r.size());
    std::vector<std::size_t> w;
    for (std::size_t c = 0; c < t.cols.size(); ++c) {
        std::size_t width = t.cols[c].size();
        for (std::size_t r = 0; r < t.rows.size(); ++r) width = std::max(width, t.at(r, c).ratio().size());
        w.push_back(width);
    }
    auto pad = [&](const std::string& s, std::size_t n) { os << s << std::string(n - s.size() + 2, ' '); };
    pad(t.row_key.empty() ? std::string("cell") : t.row_key, w0);
    for (std::size_t c = 0; c < t.cols.size(); ++c) pad(t.cols[c], w[c]);
    os << '\n';
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        pad(t.rows[r], w0);
        for (std::size_t c = 0; c < t.cols.size(); ++c) pad(t.at(r, c).ratio(), w[c]);
        os << '\n';
    }
    for (const auto& c : t.cells)
        for (const auto& e : c.errors) os << "# error [" << c.row << " | " << c.col << "] " << e << '\n';
}

/// row,col,successes,trials,misclassified,mean_accuracy,errors
inline void write_table_csv(std::ostream& os, const MatrixTable& t) {
    os << "row,col,successes,trials,misclassified,mean_accuracy,errors\n";
    for (const auto& c : t.cells)
        os << '"' << c.row << "\",\"" << c.col << "\"," << c.successes << ',' << c.trials << ',' << c.misclassified
           << ',' << c.mean_accuracy << ',' << c.errors.size() << '\n';
}

} // namespace sslpoison::harness
