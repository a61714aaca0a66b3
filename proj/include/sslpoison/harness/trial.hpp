#pragma once

// One experiment: dataset, optional poison, training, evaluation, defenses and
// an optional retrain on the cleaned pool. A trial is a pure function of its
// config apart from wall time.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sslpoison/data/dataset.hpp"
#include "sslpoison/data/dataset_io.hpp"
#include "sslpoison/defense/cluster.hpp"
#include "sslpoison/defense/collinear.hpp"
#include "sslpoison/defense/influence.hpp"
#include "sslpoison/harness/config.hpp"
#include "sslpoison/harness/curves.hpp"
#include "sslpoison/nn/model_io.hpp"
#include "sslpoison/poison/bridge.hpp"
#include "sslpoison/poison/density.hpp"
#include "sslpoison/poison/transfer.hpp"
#include "sslpoison/ssl/trace.hpp"
#include "sslpoison/ssl/trainer.hpp"

namespace sslpoison::harness {

/// Flags scored against the planted poison.
struct FlagOutcome {
    bool ran = false;
    std::vector<int> flagged;
    int true_positives = 0;
    int false_positives = 0;
    double tpr = 0.0;  // over poison points (1 when there is none)
    double fpr = 0.0;  // over benign points
};

inline FlagOutcome score_flags(std::vector<int> flagged, const std::vector<bool>& poison) {
    FlagOutcome o;
    o.ran = true;
    std::sort(flagged.begin(), flagged.end());
    int n_poison = 0;
    for (bool p : poison) n_poison += p;
    const int n_benign = static_cast<int>(poison.size()) - n_poison;
    for (int f : flagged) (poison[static_cast<std::size_t>(f)] ? o.true_positives : o.false_positives)++;
    o.tpr = n_poison ? static_cast<double>(o.true_positives) / n_poison : 1.0;
    o.fpr = n_benign ? static_cast<double>(o.false_positives) / n_benign : 0.0;
    o.flagged = std::move(flagged);
    return o;
}

/// Which examples were attacked and how.
struct Selection {
    int target_index = 0;  // into the test split
    int target_label = 0;
    int desired_label = 0;
    int source_index = -1;  // into the labeled split; -1 for transfer and zero-knowledge sources
    data::Vector target;
    data::Vector source;
};

struct TrialResult {
    std::string name;
    std::uint64_t seed = 0;
    bool poisoned = false;
    Selection selection;
    std::string source_mode = "labeled";
    int target_prediction = 0;
    double target_probability = 0.0;  // P(y* | x*) under the final model
    bool attack_success = false;      // f(x*) == y*
    bool misclassified = false;       // f(x*) != c(x*)
    double test_accuracy = 0.0;
    int unlabeled_size = 0;
    std::vector<int> poison_indices;  // into the merged unlabeled pool
    /// Main-bridge points in alpha order (first copy only).
    std::vector<int> bridge_indices;
    std::vector<double> bridge_alphas;
    std::vector<int> first_crossing;  // per bridge point, -1 if never
    FlagOutcome influence;
    FlagOutcome collinear;
    FlagOutcome cluster;
    bool retrained = false;
    int removed = 0;
    bool success_after_clean = false;
    double accuracy_after_clean = 0.0;
    double wall_seconds = 0.0;
};

/// Everything a trial produced, for callers that want more than the summary.
struct TrialArtifacts {
    data::DatasetBundle bundle;  // with the poison merged in
    ssl::TrainResult training;
    std::optional<defense::InfluenceReport> influence;
    std::optional<defense::ClusterReport> cluster;
};

/// Paired choice of target, desired label and labeled source; depends only on the seed and data.
inline Selection select_examples(const data::DatasetBundle& b, std::uint64_t seed) {
    if (b.test.empty() || b.labeled.empty()) throw ConfigError("need labeled and test examples to pick a target");
    std::mt19937_64 rng(data::mix_seed(seed, 11));
    Selection s;
    std::uniform_int_distribution<std::size_t> pick_test(0, b.test.size() - 1);
    s.target_index = static_cast<int>(pick_test(rng));
    const auto& t = b.test[static_cast<std::size_t>(s.target_index)];
    s.target = t.features;
    s.target_label = *t.label;
    std::uniform_int_distribution<int> pick_class(0, b.num_classes - 2);
    s.desired_label = pick_class(rng);
    if (s.desired_label >= s.target_label) ++s.desired_label;
    std::vector<int> candidates;
    for (std::size_t i = 0; i < b.labeled.size(); ++i)
        if (*b.labeled[i].label == s.desired_label) candidates.push_back(static_cast<int>(i));
    if (candidates.empty()) throw ConfigError("no labeled example of the desired class");
    std::uniform_int_distribution<std::size_t> pick_src(0, candidates.size() - 1);
    s.source_index = candidates[pick_src(rng)];
    s.source = b.labeled[static_cast<std::size_t>(s.source_index)].features;
    return s;
}

/// The `count` unlabeled points closest to x.
inline std::vector<data::Vector> nearest_unlabeled(const data::DatasetBundle& b, const data::Vector& x, int count) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < b.unlabeled.size(); ++i) d.emplace_back((b.unlabeled[i].features - x).squaredNorm(), i);
    count = std::min<int>(count, static_cast<int>(d.size()));
    std::partial_sort(d.begin(), d.begin() + count, d.end());
    std::vector<data::Vector> out;
    for (int k = 0; k < count; ++k) out.push_back(b.unlabeled[d[static_cast<std::size_t>(k)].second].features);
    return out;
}

namespace detail {

inline data::DatasetBundle without(const data::DatasetBundle& b, const std::vector<int>& removed) {
    std::vector<bool> drop(b.unlabeled.size(), false);
    for (int r : removed) drop[static_cast<std::size_t>(r)] = true;
    data::DatasetBundle out = b;
    out.unlabeled.clear();
    out.poison.clear();
    for (std::size_t i = 0; i < b.unlabeled.size(); ++i)
        if (!drop[i]) {
            out.unlabeled.push_back(b.unlabeled[i]);
            out.poison.push_back(b.poison[i]);
        }
    return out;
}

inline json flags_json(const FlagOutcome& f) {
    return {{"ran", f.ran},
            {"flagged", f.flagged},
            {"true_positives", f.true_positives},
            {"false_positives", f.false_positives},
            {"tpr", f.tpr},
            {"fpr", f.fpr}};
}

inline FlagOutcome flags_from_json(const json& j) {
    FlagOutcome f;
    f.ran = j.value("ran", false);
    f.flagged = j.value("flagged", std::vector<int>{});
    f.true_positives = j.value("true_positives", 0);
    f.false_positives = j.value("false_positives", 0);
    f.tpr = j.value("tpr", 0.0);
    f.fpr = j.value("fpr", 0.0);
    return f;
}

} // namespace detail

/// Without wall time, so repeated runs produce identical text.
inline json to_json(const TrialResult& r, bool include_wall_time = true) {
    json j = {{"name", r.name},
              {"seed", r.seed},
              {"poisoned", r.poisoned},
              {"source_mode", r.source_mode},
              {"target_index", r.selection.target_index},
              {"target_label", r.selection.target_label},
              {"desired_label", r.selection.desired_label},
              {"source_index", r.selection.source_index},
              {"target_prediction", r.target_prediction},
              {"target_probability", r.target_probability},
              {"attack_success", r.attack_success},
              {"misclassified", r.misclassified},
              {"test_accuracy", r.test_accuracy},
              {"unlabeled_size", r.unlabeled_size},
              {"poison_indices", r.poison_indices},
              {"bridge_indices", r.bridge_indices},
              {"bridge_alphas", r.bridge_alphas},
              {"first_crossing", r.first_crossing},
              {"influence", detail::flags_json(r.influence)},
              {"collinear", detail::flags_json(r.collinear)},
              {"cluster", detail::flags_json(r.cluster)},
              {"retrained", r.retrained},
              {"removed", r.removed},
              {"success_after_clean", r.success_after_clean},
              {"accuracy_after_clean", r.accuracy_after_clean}};
    if (include_wall_time) j["wall_seconds"] = r.wall_seconds;
    return j;
}

inline TrialResult result_from_json(const json& j) {
    TrialResult r;
    r.name = j.value("name", std::string());
    r.seed = j.value("seed", std::uint64_t{0});
    r.poisoned = j.value("poisoned", false);
    r.source_mode = j.value("source_mode", std::string("labeled"));
    r.selection.target_index = j.value("target_index", 0);
    r.selection.target_label = j.value("target_label", 0);
    r.selection.desired_label = j.value("desired_label", 0);
    r.selection.source_index = j.value("source_index", -1);
    r.target_prediction = j.value("target_prediction", 0);
    r.target_probability = j.value("target_probability", 0.0);
    r.attack_success = j.value("attack_success", false);
    r.misclassified = j.value("misclassified", false);
    r.test_accuracy = j.value("test_accuracy", 0.0);
    r.unlabeled_size = j.value("unlabeled_size", 0);
    r.poison_indices = j.value("poison_indices", std::vector<int>{});
    r.bridge_indices = j.value("bridge_indices", std::vector<int>{});
    r.bridge_alphas = j.value("bridge_alphas", std::vector<double>{});
    r.first_crossing = j.value("first_crossing", std::vector<int>{});
    if (j.contains("influence")) r.influence = detail::flags_from_json(j["influence"]);
    if (j.contains("collinear")) r.collinear = detail::flags_from_json(j["collinear"]);
    if (j.contains("cluster")) r.cluster = detail::flags_from_json(j["cluster"]);
    r.retrained = j.value("retrained", false);
    r.removed = j.value("removed", 0);
    r.success_after_clean = j.value("success_after_clean", false);
    r.accuracy_after_clean = j.value("accuracy_after_clean", 0.0);
    r.wall_seconds = j.value("wall_seconds", 0.0);
    return r;
}

/// Poison for the selected pair, or an empty set when the attack is disabled.
/// May replace the selection's source (transfer mode).
inline poison::PoisonSet make_poison(const TrialConfig& cfg, const data::DatasetBundle& clean, Selection& sel,
                                     std::string& mode_used) {
    const auto& a = cfg.attack;
    mode_used = to_string(a.source);
    if (!a.enabled) return {};
    poison::PoisonSpec spec;
    spec.target = sel.target;
    spec.desired_label = sel.desired_label;
    spec.target_label = sel.target_label;
    spec.budget = a.resolved_budget(static_cast<int>(clean.unlabeled.size()));
    spec.density = poison::density_by_name(a.density);
    spec.noise_sigma = a.noise_sigma;
    spec.noise_kind = a.noise_kind;
    spec.noise_seed = data::mix_seed(cfg.seed, 13);
    spec.unlabeled_size = static_cast<int>(clean.unlabeled.size());
    spec.allow_over_budget = a.allow_over_budget;
    if (!a.allow_over_budget && !(spec.budget * a.copies < poison::kMaxPoisonFraction * spec.unlabeled_size))
        throw ConfigError("budget with copies is not below 1% of the unlabeled pool");
    spec.source = sel.source;
    if (a.source == SourceMode::transfer) {
        ssl::TrainerConfig tc = cfg.trainer;
        tc.seed = cfg.seed;
        const auto initial = nn::make_model(tc.architecture(clean.dim, clean.num_classes), tc.seed);
        const auto found =
            poison::find_transfer_source(initial, sel.target, sel.desired_label, a.transfer_steps, a.transfer_step_size);
        if (!found.found) throw ConfigError("no transfer source found within the step limit");
        sel.source = found.source;
        sel.source_index = -1;
        spec.source = found.source;
    }
    if (a.source == SourceMode::zero_knowledge) {
        // The adversary knows no labeled example: x' is an unlabeled point of class y*,
        // supported by paths from its nearest unlabeled neighbors.
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < clean.unlabeled.size(); ++i)
            if (clean.unlabeled[i].label == sel.desired_label) pool.push_back(i);
        if (pool.empty()) throw ConfigError("no unlabeled example of the desired class");
        std::mt19937_64 rng(data::mix_seed(cfg.seed, 15));
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        const std::size_t chosen = pool[pick(rng)];
        sel.source = clean.unlabeled[chosen].features;
        sel.source_index = -1;
        spec.source = sel.source;
        for (auto& v : nearest_unlabeled(clean, sel.source, a.support_count + 1))
            if ((v - sel.source).squaredNorm() > 0.0 && static_cast<int>(spec.support.size()) < a.support_count)
                spec.support.push_back(std::move(v));
        return poison::build_zero_knowledge(spec);
    }
    return poison::build_bridge(spec);
}

inline TrialResult run_trial(const TrialConfig& cfg, TrialArtifacts* artifacts = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    TrialResult r;
    r.name = cfg.name;
    r.seed = cfg.seed;

    const data::DatasetBundle clean = data::make_dataset(cfg.dataset, cfg.seed);
    r.selection = select_examples(clean, cfg.seed);
    const poison::PoisonSet ps = make_poison(cfg, clean, r.selection, r.source_mode);
    r.poisoned = !ps.points.empty();

    // Merge the poison into U at seeded random positions.
    data::DatasetBundle bundle = clean;
    std::vector<int> origin;  // -1 for clean points, else index into ps.points
    origin.assign(clean.unlabeled.size(), -1);
    for (int copy = 0; copy < (r.poisoned ? cfg.attack.copies : 0); ++copy)
        for (std::size_t p = 0; p < ps.points.size(); ++p) origin.push_back(static_cast<int>(p) + copy * 1'000'000);
    std::vector<std::size_t> perm(origin.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (r.poisoned) {
        std::mt19937_64 rng(data::mix_seed(cfg.seed, 12));
        std::shuffle(perm.begin(), perm.end(), rng);
    }
    bundle.unlabeled.clear();
    bundle.poison.clear();
    std::vector<int> first_copy_pos(ps.points.size(), -1);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const std::size_t src = perm[i];
        if (src < clean.unlabeled.size()) {
            bundle.unlabeled.push_back(clean.unlabeled[src]);
            bundle.poison.push_back(false);
        } else {
            const int code = origin[src];
            const int p = code % 1'000'000;
            bundle.unlabeled.push_back(ps.points[static_cast<std::size_t>(p)]);
            bundle.poison.push_back(true);
            if (code < 1'000'000) first_copy_pos[static_cast<std::size_t>(p)] = static_cast<int>(i);
            r.poison_indices.push_back(static_cast<int>(i));
        }
    }
    r.unlabeled_size = static_cast<int>(bundle.unlabeled.size());
    std::vector<std::size_t> main_points;
    for (std::size_t p = 0; p < ps.points.size(); ++p)
        if (ps.path[p] == 0) main_points.push_back(p);
    std::stable_sort(main_points.begin(), main_points.end(),
                     [&](std::size_t a, std::size_t b) { return ps.alphas[a] < ps.alphas[b]; });
    for (std::size_t p : main_points) {
        r.bridge_indices.push_back(first_copy_pos[p]);
        r.bridge_alphas.push_back(ps.alphas[p]);
    }

    ssl::TrainerConfig tc = cfg.trainer;
    tc.seed = cfg.seed;
    const data::TrainingSet view = data::training_view(bundle);
    ssl::TrainResult trained = ssl::train(view, tc);

    const nn::Vector pt = nn::forward(trained.model, r.selection.target);
    r.target_prediction = nn::argmax(pt);
    r.target_probability = pt(r.selection.desired_label);
    r.attack_success = r.target_prediction == r.selection.desired_label;
    r.misclassified = r.target_prediction != r.selection.target_label;
    r.test_accuracy = ssl::accuracy(trained.model, bundle.test);
    if (!r.bridge_indices.empty())
        r.first_crossing = propagation_curves(trained.trace, r.bridge_indices, r.selection.desired_label).first_crossing;

    // Defenses see only the merged features and the trace.
    std::optional<defense::InfluenceReport> influence;
    std::optional<defense::ClusterReport> cluster;
    if (cfg.defense.influence) {
        defense::InfluenceOptions io;
        io.k = cfg.defense.influence_k;
        io.min_gap_decades = cfg.defense.influence_min_gap;
        influence = defense::influence_report(trained.trace, io);
        r.influence = score_flags(influence->flagged, bundle.poison);
    }
    if (cfg.defense.collinear) {
        auto opts = cfg.defense.collinear_options;
        opts.seed = data::mix_seed(cfg.seed, 14);
        r.collinear = score_flags(defense::detect_collinear(view.unlabeled, opts), bundle.poison);
    }
    if (cfg.defense.cluster) {
        cluster = defense::agglomerative_filter(view.unlabeled, cfg.defense.cluster_threshold);
        r.cluster = score_flags(cluster->members(cluster->removed_cluster), bundle.poison);
    }
    if (cfg.defense.retrain_after_clean) {
        const FlagOutcome& use = r.influence.ran ? r.influence : r.collinear.ran ? r.collinear : r.cluster;
        if (!use.ran) throw ConfigError("retrain_after_clean needs at least one defense enabled");
        r.retrained = true;
        r.removed = static_cast<int>(use.flagged.size());
        if (use.flagged.empty()) {
            // training is a pure function of data and config: nothing removed, same model
            r.success_after_clean = r.attack_success;
            r.accuracy_after_clean = r.test_accuracy;
        } else {
            const data::DatasetBundle cleaned = detail::without(bundle, use.flagged);
            const ssl::TrainResult again = ssl::train(data::training_view(cleaned), tc);
            r.success_after_clean = nn::predict_class(again.model, r.selection.target) == r.selection.desired_label;
            r.accuracy_after_clean = ssl::accuracy(again.model, cleaned.test);
        }
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!cfg.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.output_dir);
        const fs::path dir(cfg.output_dir);
        std::ofstream(dir / "config.json") << to_json(cfg).dump(2) << '\n';
        data::save_dataset((dir / "dataset.txt").string(), bundle);
        ssl::save_trace((dir / "trace.txt").string(), trained.trace);
        nn::save_model((dir / "model.txt").string(), trained.model);
        if (influence) {
            std::ofstream os(dir / "influence.txt");
            defense::write_influence_report(os, *influence);
        }
        if (!r.bridge_indices.empty()) {
            std::ofstream os(dir / "curves.csv");
            write_curves_csv(os, propagation_curves(trained.trace, r.bridge_indices, r.selection.desired_label));
        }
        std::ofstream(dir / "result.json") << to_json(r).dump(2) << '\n';
    }
    if (artifacts) {
        artifacts->bundle = std::move(bundle);
        artifacts->training = std::move(trained);
        artifacts->influence = std::move(influence);
        artifacts->cluster = std::move(cluster);
    }
    return r;
}

} // namespace sslpoison::harness
