#include "manifest.hpp"

#include "cagewarp/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace cagewarp::app {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
    std::array<char, 1 << 16> buf{};
    while (f) {
        f.read(buf.data(), buf.size());
        if (f.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(f.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << j.dump(2) << '\n';
    if (!f) throw IoError("failed writing " + path.string());
}

RunManifest::RunManifest(std::filesystem::path out_dir, std::string command, std::vector<std::string> argv)
    : out_dir_(std::move(out_dir)), command_(std::move(command)), argv_(std::move(argv)) {}

void RunManifest::add_input(const std::string& role, const std::filesystem::path& path) {
    inputs_.push_back({{"role", role}, {"path", path.string()}, {"sha256", sha256_file(path)}});
}

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

nlohmann::json RunManifest::to_json(const std::string& status, const std::string& error) const {
    nlohmann::json j = {{"command", command_},
                        {"argv", argv_},
                        {"version", CAGEWARP_VERSION},
                        {"seed", seed_},
                        {"threads", threads_},
                        {"config", config_},
                        {"inputs", inputs_},
                        {"outputs", outputs_},
                        {"status", status}};
    if (!error.empty()) j["error"] = error;
    return j;
}

void RunManifest::write_started() const { write_json(path(), to_json("running", {})); }

void RunManifest::finalize(bool ok, const std::string& error) const {
    write_json(path(), to_json(ok ? "ok" : "error", error));
}

}  // namespace cagewarp::app
