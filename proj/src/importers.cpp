#include "legisnet/importers.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <regex>

#include "json.hpp"
#include "legisnet/corpus.hpp"
#include "legisnet/error.hpp"
#include "utf8.hpp"

namespace legisnet {

namespace fs = std::filesystem;

namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | p[1] << 8); }

std::string read_at(std::ifstream& in, std::size_t offset, std::size_t n, const fs::path& path) {
  std::string buf(n, '\0');
  in.clear();
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(buf.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw ParseError(path.string() + ": truncated archive", offset);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Drops control characters XML 1.0 cannot carry.
std::string xml_text(std::string_view s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x20 && c != '\t' && c != '\n' && c != '\r') continue;
    out.push_back(c);
  }
  return xml_escape(out);
}

const std::map<std::string, char32_t>& named_entities() {
  static const std::map<std::string, char32_t> m = {
      {"amp", U'&'},       {"lt", U'<'},        {"gt", U'>'},       {"quot", U'"'},     {"apos", U'\''},
      {"nbsp", 0xA0},      {"sect", 0xA7},      {"para", 0xB6},     {"mdash", 0x2014},  {"ndash", 0x2013},
      {"lsquo", 0x2018},   {"rsquo", 0x2019},   {"ldquo", 0x201C},  {"rdquo", 0x201D},  {"hellip", 0x2026},
      {"deg", 0xB0},       {"frac12", 0xBD},    {"frac14", 0xBC},   {"frac34", 0xBE},   {"cent", 0xA2},
      {"copy", 0xA9},      {"reg", 0xAE},       {"trade", 0x2122},  {"emsp", 0x2003},   {"ensp", 0x2002},
      {"thinsp", 0x2009},  {"middot", 0xB7},    {"bull", 0x2022},   {"dagger", 0x2020}, {"Dagger", 0x2021}};
  return m;
}

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const std::string name(s.substr(i + 1, semi - i - 1));
    char32_t cp = 0;
    bool ok = false;
    if (name.size() > 1 && name[0] == '#') {
      try {
        const bool hex = name[1] == 'x' || name[1] == 'X';
        cp = static_cast<char32_t>(std::stoul(name.substr(hex ? 2 : 1), nullptr, hex ? 16 : 10));
        ok = cp > 0 && cp < 0x110000;
      } catch (const std::exception&) {
      }
    } else if (const auto it = named_entities().find(name); it != named_entities().end()) {
      cp = it->second;
      ok = true;
    }
    if (!ok) {
      out.push_back('&');
      continue;
    }
    detail::append_utf8(out, cp);
    i = semi;
  }
  return out;
}

std::vector<std::string_view> fields(std::string_view block, std::string_view field) {
  const std::string start = "<!-- field-start:" + std::string(field) + " -->";
  const std::string end = "<!-- field-end:" + std::string(field) + " -->";
  std::vector<std::string_view> out;
  for (std::size_t pos = block.find(start); pos != std::string_view::npos; pos = block.find(start, pos)) {
    pos += start.size();
    const auto stop = block.find(end, pos);
    out.push_back(block.substr(pos, stop == std::string_view::npos ? block.size() - pos : stop - pos));
    if (stop == std::string_view::npos) break;
    pos = stop + end.size();
  }
  return out;
}

// Section blocks start at documentid comments.
std::vector<std::string_view> blocks(std::string_view bytes) {
  static constexpr std::string_view marker = "<!-- documentid:";
  std::vector<std::string_view> out;
  auto pos = bytes.find(marker);
  while (pos != std::string_view::npos) {
    const auto next = bytes.find(marker, pos + marker.size());
    out.push_back(bytes.substr(pos, next == std::string_view::npos ? bytes.size() - pos : next - pos));
    pos = next;
  }
  return out;
}

std::vector<std::string> expcite(std::string_view block) {
  static constexpr std::string_view start = "<!-- expcite:";
  const auto pos = block.find(start);
  if (pos == std::string_view::npos) return {};
  const auto end = block.find("-->", pos);
  auto raw = std::string(block.substr(pos + start.size(), end - pos - start.size()));
  std::vector<std::string> parts;
  for (std::size_t from = 0;;) {
    const auto sep = raw.find("!@!", from);
    parts.push_back(collapse_ws(decode_entities(raw.substr(from, sep == std::string::npos ? std::string::npos : sep - from))));
    if (sep == std::string::npos) break;
    from = sep + 3;
  }
  return parts;
}

}  // namespace

ZipArchive::ZipArchive(const fs::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open archive " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  // The end-of-central-directory record sits in the last 64 KiB + 22 bytes.
  const std::size_t tail_len = std::min<std::size_t>(size, 65536 + 22);
  const auto tail = read_at(in, size - tail_len, tail_len, path);
  std::size_t eocd = std::string::npos;
  for (std::size_t i = tail_len >= 22 ? tail_len - 22 + 1 : 0; i-- > 0;)
    if (le32(reinterpret_cast<const unsigned char*>(tail.data() + i)) == 0x06054b50) {
      eocd = i;
      break;
    }
  if (eocd == std::string::npos) throw ParseError(path.string() + ": not a zip archive", 0);
  const auto* e = reinterpret_cast<const unsigned char*>(tail.data() + eocd);
  const std::size_t count = le16(e + 10);
  const std::size_t cd_size = le32(e + 12), cd_offset = le32(e + 16);
  if (cd_offset == 0xFFFFFFFF || count == 0xFFFF) throw ParseError(path.string() + ": zip64 archives are not supported", 0);
  const auto cd = read_at(in, cd_offset, cd_size, path);
  std::size_t p = 0;
  for (std::size_t k = 0; k < count; ++k) {
    if (p + 46 > cd.size()) throw ParseError(path.string() + ": truncated central directory", cd_offset + p);
    const auto* h = reinterpret_cast<const unsigned char*>(cd.data() + p);
    if (le32(h) != 0x02014b50) throw ParseError(path.string() + ": bad central directory entry", cd_offset + p);
    Entry entry;
    entry.method = le16(h + 10);
    entry.compressed_size = le32(h + 20);
    entry.size = le32(h + 24);
    const std::size_t name_len = le16(h + 28), extra_len = le16(h + 30), comment_len = le16(h + 32);
    entry.header_offset = le32(h + 42);
    entry.name = cd.substr(p + 46, name_len);
    p += 46 + name_len + extra_len + comment_len;
    if (!entry.name.empty() && entry.name.back() != '/') entries_.push_back(std::move(entry));
  }
}

std::string ZipArchive::read(std::string_view name) const {
  const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
  if (it == entries_.end()) throw ParseError(path_.string() + ": no entry " + std::string(name), 0);
  std::ifstream in(path_, std::ios::binary);
  const auto local = read_at(in, it->header_offset, 30, path_);
  const auto* h = reinterpret_cast<const unsigned char*>(local.data());
  if (le32(h) != 0x04034b50) throw ParseError(path_.string() + ": bad local header", it->header_offset);
  const std::size_t data_offset = it->header_offset + 30 + le16(h + 26) + le16(h + 28);
  const auto data = read_at(in, data_offset, it->compressed_size, path_);
  if (it->method == 0) return data;
  if (it->method != 8) throw ParseError(path_.string() + ": unsupported compression in " + it->name, data_offset);
  std::string out(it->size, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw StateError("inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != it->size) throw ParseError(path_.string() + ": corrupt entry " + it->name, data_offset);
  return out;
}

std::string strip_markup(std::string_view html) {
  std::string text;
  text.reserve(html.size());
  for (std::size_t i = 0; i < html.size();) {
    if (html.compare(i, 4, "<!--") == 0) {
      const auto end = html.find("-->", i + 4);
      i = end == std::string_view::npos ? html.size() : end + 3;
      text.push_back(' ');
    } else if (html[i] == '<') {
      const auto end = html.find('>', i);
      i = end == std::string_view::npos ? html.size() : end + 1;
      // Tags separate words; inline markup inside a word is rare in statute text.
      text.push_back(' ');
    } else {
      text.push_back(html[i++]);
    }
  }
  return collapse_ws(decode_entities(text));
}

std::optional<std::string> UscXhtmlImporter::title_key(std::string_view file) {
  static const std::regex re(R"((?:^|[/\\])(?:\d{4})?usc0*(\d+)([aA]?)\.html?$)", std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(file.begin(), file.end(), m, re)) return std::nullopt;
  std::string key = m[1].str();
  if (m[2].length() > 0) key += "a";
  return key;
}

std::string Importer::document_key(std::string_view file) const { return fs::path(file).stem().string(); }

bool UscXhtmlImporter::accepts(std::string_view file) const { return title_key(file).has_value(); }

std::string UscXhtmlImporter::document_key(std::string_view file) const {
  const auto key = title_key(file);
  if (!key) throw ConfigError("not a US Code Title file: " + std::string(file));
  return *key;
}

std::vector<std::string> UscXhtmlImporter::statute_texts(std::string_view bytes) {
  std::vector<std::string> out;
  for (const auto block : blocks(bytes)) {
    std::string text;
    for (const auto f : fields(block, "statute")) text += (text.empty() ? "" : " ") + strip_markup(f);
    out.push_back(collapse_ws(text));
  }
  return out;
}

std::string UscXhtmlImporter::convert(std::string_view bytes, std::string_view file, std::string_view date) const {
  const auto key = document_key(file);
  const bool appendix = key.back() == 'a';
  static const std::regex sec_re(R"(^Secs?\.\s+([0-9A-Za-z]+(?:-[0-9A-Za-z]+)*))");

  struct Sec {
    std::vector<std::string> path;
    std::string cite;
    std::string text;
  };
  std::string title_heading;
  std::vector<Sec> secs;
  for (const auto block : blocks(bytes)) {
    auto path = expcite(block);
    if (path.empty()) continue;
    if (title_heading.empty()) title_heading = path.front();
    std::smatch m;
    if (path.size() < 2 || !std::regex_search(path.back(), m, sec_re)) continue;
    Sec s{std::move(path), m[1].str(), {}};
    for (const auto f : fields(block, "statute")) s.text += (s.text.empty() ? "" : " ") + strip_markup(f);
    s.text = collapse_ws(s.text);
    secs.push_back(std::move(s));
  }
  // A section number can recur, typically as a "Secs. ... Repealed" range
  // next to a live section; the first occurrence with text wins.
  std::map<std::string, std::size_t> chosen;
  for (std::size_t i = 0; i < secs.size(); ++i) {
    auto [it, fresh] = chosen.emplace(normalize_citekey(secs[i].cite), i);
    if (!fresh && secs[it->second].text.empty() && !secs[i].text.empty()) it->second = i;
  }
  std::vector<bool> keep(secs.size(), false);
  for (const auto& [k, i] : chosen) keep[i] = true;

  std::vector<std::string> open;  // headings of the open items
  std::string body;
  const auto indent = [&] { return std::string(2 * (open.size() + 1 + (appendix ? 1 : 0)), ' '); };
  for (std::size_t k = 0; k < secs.size(); ++k) {
    if (!keep[k]) continue;
    const auto& s = secs[k];
    const std::vector<std::string> items(s.path.begin() + 1, s.path.end() - 1);
    std::size_t common = 0;
    while (common < open.size() && common < items.size() && open[common] == items[common]) ++common;
    while (open.size() > common) {
      open.pop_back();
      body += indent() + "</item>\n";
    }
    for (std::size_t i = common; i < items.size(); ++i) {
      body += indent() + "<item heading=\"" + xml_escape(items[i]) + "\">\n";
      open.push_back(items[i]);
    }
    body += indent() + "<seqitem citekey=\"" + xml_escape(s.cite) + "\" heading=\"" + xml_escape(s.path.back()) + "\">" +
            xml_text(s.text) + "</seqitem>\n";
  }
  while (!open.empty()) {
    open.pop_back();
    body += indent() + "</item>\n";
  }
  std::string xml = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<document abbreviation=\"" + xml_escape(key) + "\"";
  if (!title_heading.empty()) xml += " heading=\"" + xml_escape(title_heading) + "\"";
  if (!date.empty()) xml += " date=\"" + xml_escape(date) + "\"";
  xml += ">\n";
  if (appendix) xml += "  <item heading=\"Appendix\" appendix=\"true\">\n" + body + "  </item>\n";
  else xml += body;
  xml += "</document>\n";
  return xml;
}

ImportResult import_archive(const fs::path& archive, const Importer& importer, const fs::path& out_dir,
                            std::string_view collection_id, std::chrono::year_month_day date,
                            const std::vector<std::string>& only) {
  const ZipArchive zip(archive);
  const auto date_text = format_date(date);
  std::vector<std::pair<std::string, const ZipArchive::Entry*>> chosen;
  for (const auto& e : zip.entries()) {
    if (!importer.accepts(e.name)) continue;
    const auto key = importer.document_key(e.name);
    if (!only.empty() && std::find(only.begin(), only.end(), key) == only.end()) continue;
    chosen.emplace_back(key, &e);
  }
  std::sort(chosen.begin(), chosen.end(), [](const auto& a, const auto& b) { return compare_citekeys(a.first, b.first) < 0; });
  if (chosen.empty()) throw ConfigError("no importable documents in " + archive.string());
  fs::create_directories(out_dir);
  ImportResult result;
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& [key, entry] : chosen) {
    const auto xml = importer.convert(zip.read(entry->name), entry->name, date_text);
    const std::string file = key + ".xml";
    try {
      parse_document(xml, key);
    } catch (const Error& e) {
      throw SchemaError(std::string(importer.name()) + " produced invalid output for " + entry->name + ": " + e.what());
    }
    std::ofstream(out_dir / file, std::ios::binary) << xml;
    docs.push_back(file);
    result.documents.push_back(file);
  }
  result.manifest = out_dir / "manifest.json";
  std::ofstream(result.manifest) << nlohmann::json{{"collection_id", collection_id}, {"date", date_text}, {"documents", docs}}.dump(2)
                                 << "\n";
  return result;
}

}  // namespace legisnet
