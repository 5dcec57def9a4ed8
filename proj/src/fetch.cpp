#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <regex>
#include <thread>

#include "httplib.h"
#include "legisnet/pipeline.hpp"

namespace legisnet {

namespace fs = std::filesystem;

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw StateError("sha256 init failed");
  }
  void update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), digest, &len);
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", digest[i]);
      out += buf;
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::pair<std::string, std::size_t> hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot read " + path.string());
  Sha256 h;
  std::vector<char> buf(1 << 16);
  std::size_t total = 0;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    h.update(buf.data(), got);
    total += got;
  }
  return {h.hex(), total};
}

std::string expand(std::string tpl, int year) {
  char yy[8];
  std::snprintf(yy, sizeof yy, "%02d", year % 100);
  for (const auto& [key, value] : {std::pair<std::string, std::string>{"{year}", std::to_string(year)}, {"{yy}", yy}})
    for (std::size_t pos; (pos = tpl.find(key)) != std::string::npos;) tpl.replace(pos, key.size(), value);
  return tpl;
}

nlohmann::json read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return {{"archives", nlohmann::json::object()}};
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("cache manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& path, const nlohmann::json& j) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

}  // namespace

fs::path default_cache_dir() {
  if (const char* env = std::getenv("LEGISNET_CACHE"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "legisnet";
  return fs::path(".legisnet-cache");
}

std::vector<FetchedArchive> fetch_uscode(const FetchParams& params) {
  for (int y : params.years)
    if (y < 1994 || y > 2100) throw ConfigError("no archive for year " + std::to_string(y));
  if (params.retries < 1) throw ConfigError("retries must be positive");
  const auto dir = params.cache_dir.empty() ? default_cache_dir() : params.cache_dir;
  fs::create_directories(dir);
  const auto manifest_path = dir / "manifest.json";
  auto manifest = read_manifest(manifest_path);
  std::vector<FetchedArchive> out;
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)$)");
  for (int year : params.years) {
    const auto url = expand(params.url_template, year);
    std::smatch m;
    if (!std::regex_match(url, m, url_re)) throw ConfigError("bad archive url " + url);
    const std::string host = m[1], path = m[2];
    const auto ext = fs::path(path).extension().string();
    FetchedArchive a;
    a.year = year;
    a.path = dir / (std::to_string(year) + (ext.empty() ? ".bin" : ext));
    auto& entry = manifest["archives"][std::to_string(year)];
    if (fs::exists(a.path)) {
      const auto [sha, bytes] = hash_file(a.path);
      if (entry.contains("sha256") && entry["sha256"] != sha)
        throw IntegrityError("checksum mismatch for cached " + a.path.string());
      a.sha256 = sha;
      a.bytes = bytes;
      a.from_cache = true;
    } else {
      httplib::Client client(host);
      client.set_follow_location(true);
      client.set_connection_timeout(30);
      client.set_read_timeout(300);
      std::string error = "no attempt";
      for (int attempt = 0; attempt < params.retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::seconds(1 << attempt));
        const auto part = a.path.string() + ".part";
        std::ofstream file(part, std::ios::binary);
        Sha256 h;
        std::size_t bytes = 0;
        auto res = client.Get(path, [&](const char* data, std::size_t n) {
          file.write(data, static_cast<std::streamsize>(n));
          h.update(data, n);
          bytes += n;
          return static_cast<bool>(file);
        });
        file.close();
        if (res && res->status == 200 && bytes > 0) {
          fs::rename(part, a.path);
          a.sha256 = h.hex();
          a.bytes = bytes;
          error.clear();
          break;
        }
        fs::remove(part);
        error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
      }
      if (!error.empty()) throw NetworkError("fetching " + url + ": " + error);
    }
    entry = {{"file", a.path.filename().string()}, {"url", url}, {"sha256", a.sha256}, {"bytes", a.bytes}};
    write_manifest(manifest_path, manifest);
    out.push_back(a);
  }
  return out;
}

}  // namespace legisnet
