#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <zlib.h>

#include "mixbil/data.hpp"
#include "mixbil/json_util.hpp"

namespace mixbil {

inline constexpr int kBundleSchemaVersion = 1;

inline Json gen_config_to_json(const GenConfig& c) {
  return Json{{"d", c.d},   {"L", c.groups},
              {"T", c.tasks}, {"n", c.n},
              {"noise_variance", c.noise_variance}, {"seed", c.seed}};
}

inline GenConfig gen_config_from_json(const Json& j, const std::string& path, GenConfig c = {}) {
  StrictObject o(j, path);
  o.optional("d", c.d);
  o.optional("L", c.groups);
  o.optional("T", c.tasks);
  o.optional("n", c.n);
  o.optional("noise_variance", c.noise_variance);
  o.optional("seed", c.seed);
  o.finish();
  return c;
}

namespace base64 {

inline constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint8_t(bytes[i]) << 16) | (std::uint8_t(bytes[i + 1]) << 8) |
                            std::uint8_t(bytes[i + 2]);
    for (int s = 18; s >= 0; s -= 6) out += kAlphabet[(v >> s) & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = std::uint8_t(bytes[i]) << 16;
    if (rest == 2) v |= std::uint8_t(bytes[i + 1]) << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

/// Returns false on malformed input.
inline bool decode(std::string_view text, std::string& out) {
  if (text.size() % 4 != 0) return false;
  out.clear();
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      std::uint32_t six = 0;
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) return false;
        ++pad;
      } else {
        if (pad) return false;
        const auto pos = kAlphabet.find(c);
        if (pos == std::string_view::npos) return false;
        six = static_cast<std::uint32_t>(pos);
      }
      v = (v << 6) | six;
    }
    out += static_cast<char>((v >> 16) & 0xff);
    if (pad < 2) out += static_cast<char>((v >> 8) & 0xff);
    if (pad < 1) out += static_cast<char>(v & 0xff);
  }
  return true;
}

}  // namespace base64

namespace detail {

inline std::string to_le_bytes(std::span<const double> xs) {
  std::string bytes(xs.size() * 8, '\0');
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(xs[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return bytes;
}

inline std::vector<double> from_le_bytes(std::string_view bytes) {
  std::vector<double> xs(bytes.size() / 8);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(std::uint8_t(bytes[i * 8 + b])) << (8 * b);
    xs[i] = std::bit_cast<double>(bits);
  }
  return xs;
}

class PayloadWriter {
 public:
  Json add(std::span<const double> xs, Json shape) {
    const std::string bytes = to_le_bytes(xs);
    crc_ = crc32(crc_, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return Json{{"shape", std::move(shape)}, {"data", base64::encode(bytes)}};
  }
  std::uint32_t checksum() const noexcept { return static_cast<std::uint32_t>(crc_); }

 private:
  uLong crc_ = crc32(0L, Z_NULL, 0);
};

class PayloadReader {
 public:
  std::vector<double> take(const Json& j, std::size_t expected) {
    std::string bytes;
    if (!j.is_object() || !j.contains("data") || !j["data"].is_string() ||
        !base64::decode(j["data"].get_ref<const std::string&>(), bytes) ||
        bytes.size() != expected * 8)
      throw Error(Errc::checksum_mismatch, "bundle payload is malformed or truncated");
    crc_ = crc32(crc_, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return from_le_bytes(bytes);
  }
  std::uint32_t checksum() const noexcept { return static_cast<std::uint32_t>(crc_); }

 private:
  uLong crc_ = crc32(0L, Z_NULL, 0);
};

}  // namespace detail

inline std::string bundle_to_string(const TaskBundle& b) {
  detail::PayloadWriter w;
  Json tasks = Json::array();
  const std::size_t n = b.cfg.n, d = b.cfg.d;
  auto split = [&](const TaskData& t) {
    Json x = w.add(t.X.data(), Json::array({n, d}));
    Json y = w.add(t.y, Json::array({n}));
    return Json{{"X", std::move(x)}, {"y", std::move(y)}};
  };
  for (const auto& t : b.tasks) {
    Json tj;
    tj["train"] = split(t.train);
    tj["validation"] = split(t.validation);
    tj["test"] = split(t.test);
    tj["w_star"] = w.add(t.w_star, Json::array({d}));
    tasks.push_back(std::move(tj));
  }
  Json doc;
  doc["schema_version"] = kBundleSchemaVersion;
  doc["cfg"] = gen_config_to_json(b.cfg);
  doc["checksum"] = w.checksum();
  doc["group_of"] = b.group_of;
  doc["tasks"] = std::move(tasks);
  return doc.dump(1) + "\n";
}

inline TaskBundle bundle_from_string(const std::string& text) {
  const Json doc = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object())
    throw Error(Errc::checksum_mismatch, "bundle document is truncated or corrupt");
  if (!doc.contains("schema_version") || doc["schema_version"] != kBundleSchemaVersion)
    throw Error(Errc::schema_version_mismatch,
                "expected schema_version " + std::to_string(kBundleSchemaVersion));

  TaskBundle b;
  try {
    b.cfg = gen_config_from_json(doc.at("cfg"), "cfg");
    b.group_of = doc.at("group_of").get<Partition>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, std::string("bundle header: ") + e.what());
  }
  const std::size_t n = b.cfg.n, d = b.cfg.d;
  if (b.group_of.size() != d) throw Error(Errc::config, "bundle: group_of has wrong length");

  detail::PayloadReader r;
  const Json& tasks = doc.at("tasks");
  if (!tasks.is_array() || tasks.size() != b.cfg.tasks)
    throw Error(Errc::checksum_mismatch, "bundle: task count differs from header");
  auto split = [&](const Json& j) {
    TaskData t;
    t.X = Matrix(n, d, r.take(j.at("X"), n * d));
    t.y = r.take(j.at("y"), n);
    return t;
  };
  for (const auto& tj : tasks) {
    Task t;
    t.train = split(tj.at("train"));
    t.validation = split(tj.at("validation"));
    t.test = split(tj.at("test"));
    t.w_star = r.take(tj.at("w_star"), d);
    b.tasks.push_back(std::move(t));
  }
  if (!doc.contains("checksum") || doc["checksum"] != r.checksum())
    throw Error(Errc::checksum_mismatch, "bundle payload CRC-32 does not match header");
  return b;
}

inline void save_bundle(const TaskBundle& b, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << bundle_to_string(b);
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

inline TaskBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return bundle_from_string(ss.str());
}

}  // namespace mixbil
