#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cagewarp::app {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Run record: written with status "running" before the command does any
/// work, rewritten with status "ok" or "error" and the output list at the end.
class RunManifest {
public:
    RunManifest(std::filesystem::path out_dir, std::string command, std::vector<std::string> argv);

    void set_config(nlohmann::json config) { config_ = std::move(config); }
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    void set_threads(unsigned threads) { threads_ = threads; }
    void add_input(const std::string& role, const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);

    void write_started() const;
    void finalize(bool ok, const std::string& error = {}) const;

    [[nodiscard]] std::filesystem::path path() const { return out_dir_ / "manifest.json"; }

private:
    [[nodiscard]] nlohmann::json to_json(const std::string& status, const std::string& error) const;

    std::filesystem::path out_dir_;
    std::string command_;
    std::vector<std::string> argv_;
    nlohmann::json config_ = nlohmann::json::object();
    nlohmann::json inputs_ = nlohmann::json::array();
    std::vector<std::string> outputs_;
    std::uint64_t seed_ = 0;
    unsigned threads_ = 0;
};

/// Pretty JSON with a trailing newline; throws IoError.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace cagewarp::app
