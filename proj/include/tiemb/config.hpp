#pragma once

#include "tiemb/metrics.hpp"
#include "tiemb/sim.hpp"
#include "tiemb/tmb_filter.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tiemb {

/// Bad configuration; the message is prefixed with file:line when known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
    Scenario scenario = default_scenario();
    std::vector<std::string> filters{"tiemb-iplf"};
    std::vector<int> lscans{1};
    TrajectoryMode mode = TrajectoryMode::alive;
    int runs = 1;
    std::uint64_t seed = 1;
    int workers = 0;  ///< 0 picks the number of hardware threads
    FilterConfig filter;
    MetricConfig metric;

    /// Filter name x L-scan combinations in output order.
    [[nodiscard]] std::vector<NamedFilter> named_filters() const;
    void validate() const;
};

/// Parses a TOML experiment file. Missing sections keep their defaults; the
/// metric cutoff defaults to the scenario cell width.
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::string& source_name = "<config>");

/// Command-line overrides applied on top of a loaded file.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<std::string> mode;
    std::optional<std::vector<std::string>> filters;
    std::optional<std::vector<int>> lscans;
    std::optional<int> workers;
};

void apply_overrides(RunConfig& cfg, const ConfigOverrides& overrides);

[[nodiscard]] TrajectoryMode parse_mode(const std::string& text);

}  // namespace tiemb
