#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <map>
#include <string>
#include <string_view>

#include "gspin/coeffs.hpp"
#include "gspin/engine.hpp"
#include "gspin/geometry.hpp"
#include "gspin/spaces.hpp"

namespace gspin {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitHypothesis = 4 };

/// Raised when a run's precondition on the data (not the config syntax) fails.
class HypothesisViolated : public std::runtime_error {
public:
    explicit HypothesisViolated(const std::string& what) : std::runtime_error(what) {}
};

/// Checks a config against the key schema: unknown keys and wrong types are
/// ConfigErrors naming the dotted key path.
void validate_config(const nlohmann::json& config);
nlohmann::json load_config(const std::filesystem::path& path);

/// `git hash-object` of the bytes: SHA-1 over "blob <size>\0" + content.
std::string git_blob_sha1(std::string_view content);

/// Typed view of a validated config with defaults filled in; `resolved()`
/// is what goes into the manifest.
class RunConfig {
public:
    RunConfig(nlohmann::json config, std::filesystem::path base_dir);

    const nlohmann::json& resolved() const noexcept { return resolved_; }
    std::uint64_t seed() const;
    GraphPtr graph() const;
    CoefficientField field(const GraphPtr& graph) const;
    SimPlan plan() const;
    InitialCondition initial(const GraphPtr& graph) const;
    VolumeSequence volumes(const GeometricGraph& graph) const;
    ScaleInterval scale() const;

    /// Value at a dotted path, or the default (recorded into the resolved config).
    nlohmann::json get(const std::string& path, const nlohmann::json& fallback) const;
    nlohmann::json require(const std::string& path) const;
    bool has(const std::string& path) const;
    std::filesystem::path file(const std::string& path) const;

private:
    nlohmann::json config_;
    mutable nlohmann::json resolved_;
    std::filesystem::path base_dir_;
};

/// Collects output files and writes them plus manifest.json into a directory.
class OutputSet {
public:
    explicit OutputSet(std::filesystem::path dir);
    void add(const std::string& name, std::string content);
    /// Writes every file, then manifest.json listing their content hashes.
    void finish(const std::string& command, const RunConfig& config, nlohmann::json extra);
    const std::map<std::string, std::string>& hashes() const noexcept { return hashes_; }

private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> files_;
    std::map<std::string, std::string> hashes_;
};

int cmd_graph(const RunConfig& config, const std::filesystem::path& out, unsigned threads, std::ostream& log);
int cmd_simulate(const RunConfig& config, const std::filesystem::path& out, unsigned threads, std::ostream& log);
int cmd_converge(const RunConfig& config, const std::filesystem::path& out, unsigned threads, std::ostream& log);
int cmd_gibbs(const RunConfig& config, const std::filesystem::path& out, unsigned threads, std::ostream& log);
int cmd_ovs(const RunConfig& config, const std::filesystem::path& out, unsigned threads, std::ostream& log);

/// Loads the config, dispatches, and maps exceptions to exit codes
/// (messages go to err).
int run_command(const std::string& command, const std::filesystem::path& config_path,
                const std::filesystem::path& out, unsigned threads, std::ostream& log, std::ostream& err);

}  // namespace gspin
