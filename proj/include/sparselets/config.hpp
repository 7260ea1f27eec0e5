#pragma once

#include "sparselets/image.hpp"
#include "sparselets/loggabor.hpp"
#include "sparselets/priors.hpp"
#include "sparselets/pursuit.hpp"
#include "sparselets/shl.hpp"
#include "sparselets/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sparselets {

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    BankParams bank;
    PursuitParams pursuit;
    SHLParams shl;
    CoocParams cooc;
    WhiteningParams whitening;
    SyntheticStimulusSpec synth;
    int image_size = 256;
    std::uint64_t seed = 1;
    std::map<std::string, std::string> paths;

    bool operator==(const RunConfig&) const = default;
};

/// Every recognised key, in file order.
std::vector<std::string> config_keys();

/// Assigns one `key = value` entry; throws std::invalid_argument on unknown
/// keys or unparsable values. Keys `paths.<name>` are free-form.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

/// `key = value` lines with shortest round-trip number formatting.
std::string format_config(const RunConfig& config);
/// Parses `key = value` lines ('#' starts a comment) on top of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void save_config(const std::filesystem::path& path, const RunConfig& config);

/// 64-bit FNV-1a of format_config, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace sparselets
