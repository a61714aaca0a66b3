#pragma once

#include <stdexcept>
#include <string>

namespace sslpoison {

/// Tensor or vector dimensions that do not agree.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument("shape error: " + what) {}
};

/// A precondition of an operation was violated by the caller.
class ContractError : public std::invalid_argument {
public:
    explicit ContractError(const std::string& what) : std::invalid_argument("contract error: " + what) {}
};

/// A configuration value is unknown or inconsistent.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error("config error: " + what) {}
};

/// Malformed input file.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error("format error: " + what) {}
};

/// Training produced a non-finite loss; carries where it happened.
class TrainingAborted : public std::runtime_error {
public:
    TrainingAborted(const std::string& what, unsigned long long seed, int epoch, int batch)
        : std::runtime_error("training aborted: " + what + " (seed " + std::to_string(seed) +
                             ", epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ")"),
          seed_(seed), epoch_(epoch), batch_(batch) {}

    unsigned long long seed() const noexcept { return seed_; }
    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    unsigned long long seed_;
    int epoch_;
    int batch_;
};

} // namespace sslpoison
