#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sslpoison/errors.hpp"
#include "sslpoison/nn/model.hpp"

namespace sslpoison::ssl {

enum class Method { pseudo_label, pi_model, mean_teacher, vat, mixmatch_like, uda_like, fixmatch_like };

inline constexpr Method kAllMethods[] = {Method::pseudo_label, Method::pi_model,      Method::mean_teacher,
                                         Method::vat,          Method::mixmatch_like, Method::uda_like,
                                         Method::fixmatch_like};

inline std::string to_string(Method m) {
    switch (m) {
    case Method::pseudo_label: return "pseudo-label";
    case Method::pi_model: return "pi-model";
    case Method::mean_teacher: return "mean-teacher";
    case Method::vat: return "vat";
    case Method::mixmatch_like: return "mixmatch-like";
    case Method::uda_like: return "uda-like";
    case Method::fixmatch_like: return "fixmatch-like";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    for (Method m : kAllMethods)
        if (to_string(m) == s) return m;
    throw ConfigError("unknown SSL method '" + s + "'");
}

struct TrainerConfig {
    Method method = Method::fixmatch_like;
    int epochs = 200;
    int labeled_batch = 32;
    int unlabeled_batch = 64;
    double learning_rate = 0.03;
    double momentum = 0.9;
    double lambda_u = 1.0;
    /// Confidence threshold for hard pseudo-labels (pseudo-label, fixmatch-like) and the UDA mask.
    double threshold = 0.95;
    double temperature = 0.5;
    double ema_decay = 0.99;
    double vat_epsilon = 0.1;
    double vat_xi = 1e-3;
    int augment_count = 2;
    bool mixup = false;
    double mixup_alpha = 0.75;
    double weak_sigma = 0.05;
    double strong_sigma = 0.1;
    double strong_dropout = 0.0;
    /// lambda_u ramps linearly from 0 over this fraction of the epochs.
    double warmup_fraction = 0.1;
    std::vector<int> hidden{64, 64};
    nn::Activation activation = nn::Activation::tanh;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 2) throw ConfigError("epochs must be at least 2");
        if (labeled_batch <= 0 || unlabeled_batch <= 0) throw ConfigError("batch sizes must be positive");
        if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
        if (lambda_u < 0.0) throw ConfigError("lambda_u must be nonnegative");
        if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in (0,1]");
        if (temperature <= 0.0) throw ConfigError("temperature must be positive");
        if (ema_decay < 0.0 || ema_decay > 1.0) throw ConfigError("EMA decay must be in [0,1]");
        if (vat_epsilon < 0.0 || vat_xi <= 0.0) throw ConfigError("VAT radius must be >= 0 and step > 0");
        if (augment_count < 1) throw ConfigError("augment count must be positive");
        if (warmup_fraction < 0.0 || warmup_fraction > 1.0) throw ConfigError("warmup fraction must be in [0,1]");
    }

    nn::Architecture architecture(int input_dim, int num_classes) const {
        return nn::Architecture{input_dim, hidden, num_classes, activation};
    }
};

} // namespace sslpoison::ssl
