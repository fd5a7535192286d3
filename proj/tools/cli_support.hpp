#pragma once

#include "krr/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace CLI {
    class App;
}

namespace krr::cli {

    /// Exit codes shared by every subcommand.
    enum ExitCode : int { kOk = 0, kUsage = 2, kNumerical = 3, kData = 4 };

    /// File could not be opened, read or written.
    class IoError : public Error {
    public:
        using Error::Error;
    };

    /// Options that select the lambda schedule; at most one may be given.
    inline const std::vector<std::string> kScheduleGroup = {"lam", "ell", "grid-search"};

    /// Expands `--config FILE` into long-form flags placed before the user's own flags.
    /// Accepts a flat object or a manifest with a "parameters" object. Keys the user
    /// passed explicitly are dropped, as are schedule keys when the user picked a schedule.
    std::vector<std::string> inject_config(const std::vector<std::string>& args);

    /// Converts one JSON value into the flag tokens it stands for (empty for a false flag).
    std::vector<std::string> config_tokens(const std::string& key, const nlohmann::json& value);

    std::vector<double> parse_list(const std::string& text, const std::string& what);
    std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what);

    /// Directory used when no explicit output path is given.
    std::filesystem::path default_output_dir();

    /// Resolves `--out`, falling back to `<out-dir>/<fallback>`, and creates the parent directory.
    std::filesystem::path resolve_output(const std::string& out, const std::string& out_dir, const std::string& fallback);

    /// `dir/stem<suffix>` next to a primary output.
    std::filesystem::path sibling(const std::filesystem::path& primary, const std::string& suffix);

    /// Final option values of a parsed subcommand, keyed by long name.
    nlohmann::json collect_parameters(const CLI::App& sub);

    struct RunManifest {
        std::string command;
        nlohmann::json parameters;
        std::uint64_t master_seed = 0;
        std::string version;
        std::vector<std::string> outputs;
        double wall_seconds = 0.0;

        [[nodiscard]] nlohmann::json to_json() const;
    };

    void write_manifest(const std::filesystem::path& primary, const RunManifest& manifest);

    /// Opens `path`, lets `fill` write to it and throws IoError on failure.
    template <class Fn>
    void write_file(const std::filesystem::path& path, Fn&& fill) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) { throw IoError("cannot open '" + path.string() + "' for writing"); }
        fill(out);
        out.flush();
        if (!out) { throw IoError("write to '" + path.string() + "' failed"); }
    }

    int exit_code_for(const std::exception& e);

}  // namespace krr::cli
