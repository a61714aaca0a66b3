// sslpoison command line: train, attack, trial, matrix, defend, report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "sslpoison/sslpoison.hpp"

namespace fs = std::filesystem;
using namespace sslpoison;
using harness::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot read " + path);
    try {
        return json::parse(is, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

harness::TrialConfig load_trial(const std::string& path) {
    return path.empty() ? harness::TrialConfig{} : harness::trial_from_json(read_json_file(path));
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p);
    if (!os) throw FormatError("cannot write " + p.string());
    os << s;
}

// Common overrides shared by train / attack / trial.
struct Overrides {
    std::string method, kind, density;
    int epochs = 0;
    int budget = 0;
    long long seed = -1;

    void add(CLI::App* app, bool attack_options) {
        app->add_option("--method", method, "SSL method (pseudo-label, pi-model, mean-teacher, vat, mixmatch-like, "
                                            "uda-like, fixmatch-like)");
        app->add_option("--dataset", kind, "two-moons, gaussian-blobs, ring or raster-digits-lite");
        app->add_option("--epochs", epochs, "training epochs");
        app->add_option("--seed", seed, "trial seed");
        if (attack_options) {
            app->add_option("--budget", budget, "number of poison points");
            app->add_option("--density", density, "bridge density name, e.g. 1.5-x");
        }
    }
    void apply(harness::TrialConfig& c) const {
        if (!method.empty()) c.trainer.method = ssl::method_from_string(method);
        if (!kind.empty()) c.dataset.kind = data::dataset_kind_from_string(kind);
        if (epochs > 0) c.trainer.epochs = epochs;
        if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
        if (budget > 0) c.attack.budget = budget;
        if (!density.empty()) c.attack.density = density;
    }
};

void print_summary(const harness::TrialResult& r) {
    std::cout << "seed " << r.seed << (r.poisoned ? " poisoned" : " control") << "  target " << r.selection.target_index
              << " (class " << r.selection.target_label << " -> " << r.selection.desired_label << ")"
              << "  predicted " << r.target_prediction << "  P(y*) " << r.target_probability
              << "  success " << (r.attack_success ? "yes" : "no") << "  accuracy " << r.test_accuracy << '\n';
    auto flags = [](const char* name, const harness::FlagOutcome& f) {
        if (f.ran)
            std::cout << "  " << name << ": flagged " << f.flagged.size() << "  TPR " << f.tpr << "  FPR " << f.fpr
                      << '\n';
    };
    flags("influence", r.influence);
    flags("collinear", r.collinear);
    flags("cluster", r.cluster);
    if (r.retrained)
        std::cout << "  retrained without " << r.removed << " points: success "
                  << (r.success_after_clean ? "yes" : "no") << "  accuracy " << r.accuracy_after_clean << '\n';
}

int cmd_train(const std::string& config, const std::string& data_path, const std::string& out,
              const Overrides& ov) {
    harness::TrialConfig c = load_trial(config);
    ov.apply(c);
    const data::DatasetBundle b = data_path.empty() ? data::make_dataset(c.dataset, c.seed) : data::load_dataset(data_path);
    ssl::TrainerConfig tc = c.trainer;
    tc.seed = c.seed;
    const auto res = ssl::train(data::training_view(b), tc);
    const double acc = res.metrics.test_accuracy.empty() ? 0.0 : res.metrics.test_accuracy.back();
    std::cout << ssl::to_string(tc.method) << " on " << b.kind << ": test accuracy " << acc << " after "
              << tc.epochs << " epochs\n";
    if (!out.empty()) {
        fs::create_directories(out);
        nn::save_model((fs::path(out) / "model.txt").string(), res.model);
        ssl::save_trace((fs::path(out) / "trace.txt").string(), res.trace);
        if (data_path.empty()) data::save_dataset((fs::path(out) / "dataset.txt").string(), b);
        std::ostringstream m;
        m << "epoch,test_accuracy,supervised_loss,unlabeled_loss,mask_rate\n";
        for (std::size_t e = 0; e < res.metrics.supervised_loss.size(); ++e)
            m << e << ',' << (e < res.metrics.test_accuracy.size() ? res.metrics.test_accuracy[e] : 0.0) << ','
              << res.metrics.supervised_loss[e] << ',' << res.metrics.unlabeled_loss[e] << ','
              << res.metrics.mask_rate[e] << '\n';
        write_text(fs::path(out) / "metrics.csv", m.str());
        std::cout << "wrote " << out << '\n';
    }
    return 0;
}

int cmd_attack(const std::string& config, const std::string& out, const Overrides& ov) {
    harness::TrialConfig c = load_trial(config);
    ov.apply(c);
    c.attack.enabled = true;
    const data::DatasetBundle clean = data::make_dataset(c.dataset, c.seed);
    harness::Selection sel = harness::select_examples(clean, c.seed);
    std::string mode;
    const auto ps = harness::make_poison(c, clean, sel, mode);
    data::DatasetBundle b = clean;
    for (const auto& p : ps.points) {
        b.unlabeled.push_back(p);
        b.poison.push_back(true);
    }
    std::cout << "target test[" << sel.target_index << "] class " << sel.target_label << " -> " << sel.desired_label
              << ", source " << (sel.source_index >= 0 ? "labeled[" + std::to_string(sel.source_index) + "]" : mode)
              << ", " << ps.points.size() << " poison points\n";
    if (out.empty()) {
        data::write_dataset(std::cout, b);
    } else {
        data::save_dataset(out, b);
        std::cout << "wrote " << out << '\n';
    }
    return 0;
}

int cmd_trial(const std::string& config, const std::string& out, bool control, bool influence, bool collinear,
              double cluster, bool retrain, const Overrides& ov) {
    harness::TrialConfig c = load_trial(config);
    ov.apply(c);
    if (control) c.attack.enabled = false;
    if (influence) c.defense.influence = true;
    if (collinear) c.defense.collinear = true;
    if (cluster > 0.0) {
        c.defense.cluster = true;
        c.defense.cluster_threshold = cluster;
    }
    if (retrain) c.defense.retrain_after_clean = true;
    if (!out.empty()) c.output_dir = out;
    print_summary(harness::run_trial(c));
    if (!c.output_dir.empty()) std::cout << "wrote " << c.output_dir << '\n';
    return 0;
}

int cmd_matrix(const std::string& config, const std::string& out, int parallelism) {
    harness::MatrixSpec m = harness::matrix_from_json(read_json_file(config));
    if (parallelism > 0) m.parallelism = parallelism;
    if (!out.empty()) m.output_dir = out;
    const auto table = harness::run_matrix(m);
    harness::write_table(std::cout, table);
    if (!m.output_dir.empty()) {
        fs::create_directories(m.output_dir);
        std::ofstream t(fs::path(m.output_dir) / "table.txt");
        harness::write_table(t, table);
        std::ofstream csv(fs::path(m.output_dir) / "table.csv");
        harness::write_table_csv(csv, table);
        std::cout << "wrote " << m.output_dir << '\n';
    }
    return 0;
}

int cmd_defend(const std::string& data_path, const std::string& trace_path, const std::string& out, int k,
               bool collinear, double epsilon, double cluster) {
    const data::DatasetBundle b = data::load_dataset(data_path);
    const nn::Matrix u = b.unlabeled_features();
    const bool tagged = !b.poison_indices().empty();
    auto report = [&](const char* name, const std::vector<int>& flagged) {
        std::cout << name << ": flagged " << flagged.size() << " of " << u.cols();
        if (tagged) {
            const auto s = harness::score_flags(flagged, b.poison);
            std::cout << "  TPR " << s.tpr << "  FPR " << s.fpr;
        }
        std::cout << '\n';
    };
    if (!trace_path.empty()) {
        const auto trace = ssl::load_trace(trace_path);
        if (trace.examples != u.cols()) throw ShapeError("trace and dataset disagree on the unlabeled pool size");
        defense::InfluenceOptions io;
        io.k = k;
        const auto r = defense::influence_report(trace, io);
        report("influence", r.flagged);
        if (!out.empty()) {
            std::ofstream os(out);
            defense::write_influence_report(os, r);
        }
    }
    if (collinear) {
        defense::CollinearOptions co;
        co.epsilon = epsilon;
        report("collinear", defense::detect_collinear(u, co));
    }
    if (cluster > 0.0) {
        const auto r = defense::agglomerative_filter(u, cluster);
        std::cout << "cluster: " << r.clusters << " clusters, largest has " << r.cluster_sizes[static_cast<std::size_t>(r.removed_cluster)]
                  << " points\n";
        report("cluster", r.members(r.removed_cluster));
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& curves_dir) {
    // Group result.json files by trial name.
    std::map<std::string, std::vector<harness::TrialResult>> groups;
    std::vector<fs::path> files;
    for (const auto& d : dirs) {
        if (fs::is_regular_file(d)) {
            files.emplace_back(d);
            continue;
        }
        for (const auto& e : fs::recursive_directory_iterator(d))
            if (e.is_regular_file() && e.path().filename() == "result.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::cout << "name,seed,poisoned,success,misclassified,accuracy,target_probability,influence_tpr,influence_fpr\n";
    for (const auto& f : files) {
        const auto r = harness::result_from_json(read_json_file(f.string()));
        std::cout << r.name << ',' << r.seed << ',' << r.poisoned << ',' << r.attack_success << ',' << r.misclassified
                  << ',' << r.test_accuracy << ',' << r.target_probability << ',' << r.influence.tpr << ','
                  << r.influence.fpr << '\n';
        groups[r.name].push_back(r);
        if (!curves_dir.empty() && !r.first_crossing.empty()) {
            fs::create_directories(curves_dir);
            std::ofstream os(fs::path(curves_dir) / (f.parent_path().filename().string() + "_crossings.csv"));
            os << "alpha,first_crossing\n";
            for (std::size_t i = 0; i < r.first_crossing.size(); ++i)
                os << r.bridge_alphas[i] << ',' << r.first_crossing[i] << '\n';
        }
    }
    std::cout << "\n# success by name\n";
    for (const auto& [name, rs] : groups) {
        int s = 0;
        double acc = 0.0;
        for (const auto& r : rs) {
            s += r.attack_success;
            acc += r.test_accuracy;
        }
        std::cout << name << "  " << s << '/' << rs.size() << "  mean accuracy " << acc / static_cast<double>(rs.size())
                  << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised poisoning laboratory"};
    app.require_subcommand(1);

    std::string config, data_path, out, trace_path, curves_dir;
    Overrides ov;

    auto* train = app.add_subcommand("train", "train one SSL model");
    train->add_option("-c,--config", config, "trial config (JSON); dataset and trainer sections are used");
    train->add_option("--data", data_path, "dataset file instead of generating one");
    train->add_option("-o,--out", out, "output directory (model, trace, metrics)");
    ov.add(train, false);

    auto* attack = app.add_subcommand("attack", "build a poison set and write the poisoned dataset");
    attack->add_option("-c,--config", config, "trial config (JSON)");
    attack->add_option("-o,--out", out, "dataset file to write (stdout if omitted)");
    ov.add(attack, true);

    bool control = false, influence = false, collinear = false, retrain = false;
    double cluster = 0.0;
    auto* trial = app.add_subcommand("trial", "run the full pipeline for one seed");
    trial->add_option("-c,--config", config, "trial config (JSON)");
    trial->add_option("-o,--out", out, "run directory");
    trial->add_flag("--control", control, "disable the attack");
    trial->add_flag("--influence", influence, "run the influence defense");
    trial->add_flag("--collinear", collinear, "run the collinearity scan");
    trial->add_option("--cluster", cluster, "run agglomerative clustering with this stop threshold");
    trial->add_flag("--retrain", retrain, "remove flagged points and retrain");
    ov.add(trial, true);

    int parallelism = 0;
    auto* matrix = app.add_subcommand("matrix", "run a grid of trials from a matrix config");
    matrix->add_option("-c,--config", config, "matrix config (JSON)")->required();
    matrix->add_option("-o,--out", out, "output directory");
    matrix->add_option("-j,--parallelism", parallelism, "worker threads");

    int k = 5;
    bool scan = false;
    double epsilon = 1e-6;
    auto* defend = app.add_subcommand("defend", "run defenses on a saved dataset (and trace)");
    defend->add_option("--data", data_path, "dataset file")->required();
    defend->add_option("--trace", trace_path, "trace file; enables the influence defense");
    defend->add_option("-k", k, "influence neighbors");
    defend->add_option("-o,--out", out, "influence report file");
    defend->add_flag("--collinear", scan, "run the collinearity scan");
    defend->add_option("--epsilon", epsilon, "collinearity tolerance");
    defend->add_option("--cluster", cluster, "agglomerative stop threshold");

    std::vector<std::string> dirs;
    auto* report = app.add_subcommand("report", "summarize run directories");
    report->add_option("dirs", dirs, "run directories or result.json files")->required();
    report->add_option("--curves", curves_dir, "write first-crossing CSVs here");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train) return cmd_train(config, data_path, out, ov);
        if (*attack) return cmd_attack(config, out, ov);
        if (*trial) return cmd_trial(config, out, control, influence, collinear, cluster, retrain, ov);
        if (*matrix) return cmd_matrix(config, out, parallelism);
        if (*defend) return cmd_defend(data_path, trace_path, out, k, scan, epsilon, cluster);
        if (*report) return cmd_report(dirs, curves_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
