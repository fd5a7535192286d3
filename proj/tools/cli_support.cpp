#include "cli_support.hpp"

#include "krr/csv.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace krr::cli {

    namespace {
        std::string scalar_text(const nlohmann::json& v) {
            if (v.is_string()) { return v.get<std::string>(); }
            if (v.is_number_integer()) { return std::to_string(v.get<long long>()); }
            if (v.is_number_unsigned()) { return std::to_string(v.get<unsigned long long>()); }
            if (v.is_number_float()) { return csv::format_number(v.get<double>()); }
            throw InvalidParameter("config: unsupported value " + v.dump());
        }

        // Long option name a token refers to, or empty for positionals and values.
        std::string flag_name(const std::string& token) {
            if (token.size() < 3 || token.rfind("--", 0) != 0) { return {}; }
            return token.substr(2, token.find('=') - 2);
        }
    }  // namespace

    std::vector<std::string> config_tokens(const std::string& key, const nlohmann::json& value) {
        if (value.is_null()) { return {}; }
        if (value.is_boolean()) {
            if (value.get<bool>()) { return {"--" + key}; }
            return {};
        }
        if (value.is_array()) {
            std::string joined;
            for (const auto& item : value) {
                if (!joined.empty()) { joined += ','; }
                joined += scalar_text(item);
            }
            return {"--" + key + "=" + joined};
        }
        return {"--" + key + "=" + scalar_text(value)};
    }

    std::vector<std::string> inject_config(const std::vector<std::string>& args) {
        std::vector<std::string> user;
        std::string config_path;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config") {
                if (i + 1 >= args.size()) { throw InvalidParameter("--config needs a file"); }
                config_path = args[++i];
            } else if (args[i].rfind("--config=", 0) == 0) {
                config_path = args[i].substr(9);
            } else {
                user.push_back(args[i]);
            }
        }
        if (config_path.empty() || user.empty()) { return user; }

        std::ifstream in(config_path);
        if (!in) { throw IoError("cannot open config '" + config_path + "'"); }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("config '" + config_path + "': " + e.what());
        }
        if (doc.is_object() && doc.contains("parameters")) { doc = doc.at("parameters"); }
        if (!doc.is_object()) { throw SchemaError("config '" + config_path + "' must be a JSON object"); }

        std::set<std::string> given;
        for (const auto& token : user) {
            if (auto name = flag_name(token); !name.empty()) { given.insert(name); }
        }
        const bool schedule_given = std::any_of(kScheduleGroup.begin(), kScheduleGroup.end(),
                                                [&](const std::string& k) { return given.contains(k); });

        // The subcommand stays first so injected flags bind to it.
        std::vector<std::string> out{user.front()};
        for (const auto& [key, value] : doc.items()) {
            if (given.contains(key)) { continue; }
            const bool in_group = std::find(kScheduleGroup.begin(), kScheduleGroup.end(), key) != kScheduleGroup.end();
            if (schedule_given && in_group) { continue; }
            for (auto& t : config_tokens(key, value)) { out.push_back(std::move(t)); }
        }
        out.insert(out.end(), user.begin() + 1, user.end());
        return out;
    }

    std::vector<double> parse_list(const std::string& text, const std::string& what) {
        std::vector<double> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                out.push_back(csv::parse_number(item));
            } catch (const Error&) { throw InvalidParameter(what + ": bad number '" + item + "'"); }
        }
        if (out.empty()) { throw InvalidParameter(what + ": empty list"); }
        return out;
    }

    std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
        std::vector<std::size_t> out;
        for (double v : parse_list(text, what)) {
            if (!(v >= 1.0) || v != std::floor(v) || v > 1e15) {
                throw InvalidParameter(what + ": expected positive integers");
            }
            out.push_back(static_cast<std::size_t>(v));
        }
        return out;
    }

    std::filesystem::path default_output_dir() {
        if (const char* env = std::getenv("KRR_OUTPUT_DIR"); env && *env) { return env; }
        return ".";
    }

    std::filesystem::path resolve_output(const std::string& out, const std::string& out_dir,
                                         const std::string& fallback) {
        std::filesystem::path path = out.empty() ? std::filesystem::path(out_dir) / fallback : std::filesystem::path(out);
        if (path.has_parent_path()) {
            std::error_code ec;
            std::filesystem::create_directories(path.parent_path(), ec);
            if (ec) { throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message()); }
        }
        return path;
    }

    std::filesystem::path sibling(const std::filesystem::path& primary, const std::string& suffix) {
        return primary.parent_path() / (primary.stem().string() + suffix);
    }

    nlohmann::json collect_parameters(const CLI::App& sub) {
        nlohmann::json params = nlohmann::json::object();
        for (const CLI::Option* opt : sub.get_options()) {
            const std::string name = opt->get_single_name();
            if (name == "help" || name == "config" || name.empty()) { continue; }
            if (opt->get_type_size() == 0) {
                params[name] = opt->count() > 0;
                continue;
            }
            if (opt->count() > 0) {
                params[name] = opt->results().back();
            } else if (!opt->get_default_str().empty()) {
                params[name] = opt->get_default_str();
            }
        }
        return params;
    }

    nlohmann::json RunManifest::to_json() const {
        return nlohmann::json{{"command", command},         {"parameters", parameters},
                              {"master_seed", master_seed}, {"version", version},
                              {"outputs", outputs},         {"wall_seconds", wall_seconds}};
    }

    void write_manifest(const std::filesystem::path& primary, const RunManifest& manifest) {
        const auto path = std::filesystem::path(primary.string() + ".manifest.json");
        write_file(path, [&](std::ostream& out) { out << manifest.to_json().dump(2) << '\n'; });
    }

    int exit_code_for(const std::exception& e) {
        if (dynamic_cast<const InvalidParameter*>(&e)) { return kUsage; }
        if (dynamic_cast<const NumericalError*>(&e)) { return kNumerical; }
        return kData;
    }

}  // namespace krr::cli
