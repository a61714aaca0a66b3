#pragma once

// Trial configuration and its JSON form. Every field has a default, so a config
// file only needs the keys it changes; unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "sslpoison/data/dataset.hpp"
#include "sslpoison/defense/collinear.hpp"
#include "sslpoison/errors.hpp"
#include "sslpoison/poison/bridge.hpp"
#include "sslpoison/ssl/config.hpp"

namespace sslpoison::harness {

using json = nlohmann::json;

enum class SourceMode { labeled, zero_knowledge, transfer };

inline std::string to_string(SourceMode m) {
    switch (m) {
    case SourceMode::labeled: return "labeled";
    case SourceMode::zero_knowledge: return "zero-knowledge";
    case SourceMode::transfer: return "transfer";
    }
    return "?";
}

inline SourceMode source_mode_from_string(const std::string& s) {
    if (s == "labeled") return SourceMode::labeled;
    if (s == "zero-knowledge") return SourceMode::zero_knowledge;
    if (s == "transfer") return SourceMode::transfer;
    throw ConfigError("unknown source mode '" + s + "'");
}

struct AttackConfig {
    bool enabled = true;
    /// Poison points; when 0, budget_fraction * |U| (rounded) is used.
    int budget = 0;
    double budget_fraction = 0.005;
    std::string density = "1.5-x";
    double noise_sigma = 0.0;
    poison::NoiseKind noise_kind = poison::NoiseKind::gaussian;
    SourceMode source = SourceMode::labeled;
    int support_count = 2;        // zero-knowledge support paths
    int transfer_steps = 50;
    double transfer_step_size = 0.1;
    int copies = 1;               // every poison point inserted this many times
    bool allow_over_budget = false;

    int resolved_budget(int unlabeled) const {
        if (budget > 0) return budget;
        return static_cast<int>(std::lround(budget_fraction * unlabeled));
    }
};

struct DefenseConfig {
    bool influence = false;
    int influence_k = 5;
    double influence_min_gap = 1.0;
    bool collinear = false;
    defense::CollinearOptions collinear_options;
    bool cluster = false;
    double cluster_threshold = 0.05;
    /// Remove the influence defense's flags (or the collinearity flags when the
    /// influence defense is off) and train again from scratch.
    bool retrain_after_clean = false;
};

struct TrialConfig {
    std::string name = "trial";
    data::DatasetSpec dataset;
    ssl::TrainerConfig trainer;
    AttackConfig attack;
    DefenseConfig defense;
    /// Drives dataset, source/target choice and training; trials with equal seeds
    /// share their images (paired seeds).
    std::uint64_t seed = 0;
    std::string output_dir;  // empty: nothing written
};

namespace detail {

/// Reads `key` into `out` if present.
template <typename T>
void get(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

inline void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : j.items())
        if (!ok.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

} // namespace detail

inline json to_json(const data::DatasetSpec& s) {
    return {{"kind", data::to_string(s.kind)}, {"labeled", s.labeled}, {"unlabeled", s.unlabeled},
            {"test", s.test},  {"classes", s.classes}, {"dim", s.dim},
            {"noise", s.noise}, {"extra_noise", s.extra_noise}};
}

inline data::DatasetSpec dataset_from_json(const json& j) {
    detail::check_keys(j, "dataset", {"kind", "labeled", "unlabeled", "test", "classes", "dim", "noise", "extra_noise"});
    data::DatasetSpec s;
    if (j.contains("kind")) s.kind = data::dataset_kind_from_string(j["kind"].get<std::string>());
    detail::get(j, "labeled", s.labeled);
    detail::get(j, "unlabeled", s.unlabeled);
    detail::get(j, "test", s.test);
    detail::get(j, "classes", s.classes);
    detail::get(j, "dim", s.dim);
    detail::get(j, "noise", s.noise);
    detail::get(j, "extra_noise", s.extra_noise);
    return s;
}

inline json to_json(const ssl::TrainerConfig& c) {
    return {{"method", ssl::to_string(c.method)},
            {"epochs", c.epochs},
            {"labeled_batch", c.labeled_batch},
            {"unlabeled_batch", c.unlabeled_batch},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"lambda_u", c.lambda_u},
            {"threshold", c.threshold},
            {"temperature", c.temperature},
            {"ema_decay", c.ema_decay},
            {"vat_epsilon", c.vat_epsilon},
            {"vat_xi", c.vat_xi},
            {"augment_count", c.augment_count},
            {"mixup", c.mixup},
            {"mixup_alpha", c.mixup_alpha},
            {"weak_sigma", c.weak_sigma},
            {"strong_sigma", c.strong_sigma},
            {"strong_dropout", c.strong_dropout},
            {"warmup_fraction", c.warmup_fraction},
            {"hidden", c.hidden},
            {"activation", nn::to_string(c.activation)}};
}

/// The trainer seed is not part of this object; trials derive it from their own seed.
inline ssl::TrainerConfig trainer_from_json(const json& j) {
    detail::check_keys(j, "trainer",
                       {"method", "epochs", "labeled_batch", "unlabeled_batch", "learning_rate", "momentum",
                        "lambda_u", "threshold", "temperature", "ema_decay", "vat_epsilon", "vat_xi",
                        "augment_count", "mixup", "mixup_alpha", "weak_sigma", "strong_sigma", "strong_dropout",
                        "warmup_fraction", "hidden", "activation"});
    ssl::TrainerConfig c;
    if (j.contains("method")) c.method = ssl::method_from_string(j["method"].get<std::string>());
    detail::get(j, "epochs", c.epochs);
    detail::get(j, "labeled_batch", c.labeled_batch);
    detail::get(j, "unlabeled_batch", c.unlabeled_batch);
    detail::get(j, "learning_rate", c.learning_rate);
    detail::get(j, "momentum", c.momentum);
    detail::get(j, "lambda_u", c.lambda_u);
    detail::get(j, "threshold", c.threshold);
    detail::get(j, "temperature", c.temperature);
    detail::get(j, "ema_decay", c.ema_decay);
    detail::get(j, "vat_epsilon", c.vat_epsilon);
    detail::get(j, "vat_xi", c.vat_xi);
    detail::get(j, "augment_count", c.augment_count);
    detail::get(j, "mixup", c.mixup);
    detail::get(j, "mixup_alpha", c.mixup_alpha);
    detail::get(j, "weak_sigma", c.weak_sigma);
    detail::get(j, "strong_sigma", c.strong_sigma);
    detail::get(j, "strong_dropout", c.strong_dropout);
    detail::get(j, "warmup_fraction", c.warmup_fraction);
    detail::get(j, "hidden", c.hidden);
    if (j.contains("activation")) c.activation = nn::activation_from_string(j["activation"].get<std::string>());
    return c;
}

inline json to_json(const AttackConfig& a) {
    return {{"enabled", a.enabled},
            {"budget", a.budget},
            {"budget_fraction", a.budget_fraction},
            {"density", a.density},
            {"noise_sigma", a.noise_sigma},
            {"noise_kind", a.noise_kind == poison::NoiseKind::gaussian ? "gaussian" : "uniform"},
            {"source", to_string(a.source)},
            {"support_count", a.support_count},
            {"transfer_steps", a.transfer_steps},
            {"transfer_step_size", a.transfer_step_size},
            {"copies", a.copies},
            {"allow_over_budget", a.allow_over_budget}};
}

inline AttackConfig attack_from_json(const json& j) {
    detail::check_keys(j, "attack",
                       {"enabled", "budget", "budget_fraction", "density", "noise_sigma", "noise_kind", "source",
                        "support_count", "transfer_steps", "transfer_step_size", "copies", "allow_over_budget"});
    AttackConfig a;
    detail::get(j, "enabled", a.enabled);
    detail::get(j, "budget", a.budget);
    detail::get(j, "budget_fraction", a.budget_fraction);
    detail::get(j, "density", a.density);
    detail::get(j, "noise_sigma", a.noise_sigma);
    if (j.contains("noise_kind")) {
        const auto k = j["noise_kind"].get<std::string>();
        if (k == "gaussian") a.noise_kind = poison::NoiseKind::gaussian;
        else if (k == "uniform") a.noise_kind = poison::NoiseKind::uniform;
        else throw ConfigError("unknown noise kind '" + k + "'");
    }
    if (j.contains("source")) a.source = source_mode_from_string(j["source"].get<std::string>());
    detail::get(j, "support_count", a.support_count);
    detail::get(j, "transfer_steps", a.transfer_steps);
    detail::get(j, "transfer_step_size", a.transfer_step_size);
    detail::get(j, "copies", a.copies);
    detail::get(j, "allow_over_budget", a.allow_over_budget);
    if (a.copies < 1) throw ConfigError("copies must be at least 1");
    const auto known = poison::registered_densities();
    if (std::none_of(known.begin(), known.end(), [&](const auto& d) { return d.name() == a.density; }))
        throw ConfigError("unknown density '" + a.density + "'");
    return a;
}

inline json to_json(const DefenseConfig& d) {
    return {{"influence", d.influence},
            {"influence_k", d.influence_k},
            {"influence_min_gap", d.influence_min_gap},
            {"collinear", d.collinear},
            {"collinear_epsilon", d.collinear_options.epsilon},
            {"collinear_min_run", d.collinear_options.min_run},
            {"collinear_trials", d.collinear_options.trials},
            {"collinear_neighbors", d.collinear_options.neighbors},
            {"cluster", d.cluster},
            {"cluster_threshold", d.cluster_threshold},
            {"retrain_after_clean", d.retrain_after_clean}};
}

inline DefenseConfig defense_from_json(const json& j) {
    detail::check_keys(j, "defense",
                       {"influence", "influence_k", "influence_min_gap", "collinear", "collinear_epsilon",
                        "collinear_min_run", "collinear_trials", "collinear_neighbors", "cluster",
                        "cluster_threshold", "retrain_after_clean"});
    DefenseConfig d;
    detail::get(j, "influence", d.influence);
    detail::get(j, "influence_k", d.influence_k);
    detail::get(j, "influence_min_gap", d.influence_min_gap);
    detail::get(j, "collinear", d.collinear);
    detail::get(j, "collinear_epsilon", d.collinear_options.epsilon);
    detail::get(j, "collinear_min_run", d.collinear_options.min_run);
    detail::get(j, "collinear_trials", d.collinear_options.trials);
    detail::get(j, "collinear_neighbors", d.collinear_options.neighbors);
    detail::get(j, "cluster", d.cluster);
    detail::get(j, "cluster_threshold", d.cluster_threshold);
    detail::get(j, "retrain_after_clean", d.retrain_after_clean);
    return d;
}

inline json to_json(const TrialConfig& c) {
    return {{"name", c.name},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"dataset", to_json(c.dataset)},
            {"trainer", to_json(c.trainer)},
            {"attack", to_json(c.attack)},
            {"defense", to_json(c.defense)}};
}

inline TrialConfig trial_from_json(const json& j) {
    detail::check_keys(j, "trial", {"name", "seed", "output_dir", "dataset", "trainer", "attack", "defense"});
    TrialConfig c;
    detail::get(j, "name", c.name);
    detail::get(j, "seed", c.seed);
    detail::get(j, "output_dir", c.output_dir);
    if (j.contains("dataset")) c.dataset = dataset_from_json(j["dataset"]);
    if (j.contains("trainer")) c.trainer = trainer_from_json(j["trainer"]);
    if (j.contains("attack")) c.attack = attack_from_json(j["attack"]);
    if (j.contains("defense")) c.defense = defense_from_json(j["defense"]);
    return c;
}

/// Sets a dotted path ("trainer.method") inside a JSON object, creating objects as needed.
inline void set_path(json& j, const std::string& dotted, const json& value) {
    json* node = &j;
    std::size_t start = 0;
    for (;;) {
        const auto dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("bad key path '" + dotted + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        if (!node->is_object()) *node = json::object();
        start = dot + 1;
    }
}

} // namespace sslpoison::harness
