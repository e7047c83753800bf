#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "gspin/cli.hpp"
#include "gspin/errors.hpp"

#ifndef GSPIN_VERSION
#define GSPIN_VERSION "unknown"
#endif

namespace gspin {

std::string git_blob_sha1(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw std::runtime_error("sha1 digest failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

OutputSet::OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}

void OutputSet::add(const std::string& name, std::string content) {
    hashes_[name] = git_blob_sha1(content);
    files_[name] = std::move(content);
}

void OutputSet::finish(const std::string& command, const RunConfig& config, nlohmann::json extra) {
    std::filesystem::create_directories(dir_);
    for (const auto& [name, content] : files_) {
        std::ofstream out(dir_ / name, std::ios::binary);
        out << content;
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    }
    nlohmann::json m;
    m["command"] = command;
    m["code_version"] = GSPIN_VERSION;
    m["seed"] = config.seed();
    m["config"] = config.resolved();
    m["outputs"] = hashes_;
    for (auto& [k, v] : extra.items()) m[k] = v;
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << m.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write manifest.json");
}

}  // namespace gspin
