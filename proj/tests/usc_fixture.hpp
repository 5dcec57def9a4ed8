#pragma once

// US Code XHTML test material: a synthetic Title writer, a minimal zip writer
// and an independent statute token counter.

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace legisnet::usc_fixture {

struct Section {
  std::string number;
  std::string heading;
  /// Statute field HTML; empty for repealed sections.
  std::string statute;
  std::string notes;
};

struct Chapter {
  std::string heading;
  std::vector<Section> sections;
};

inline std::string title_file(int title, const std::string& title_heading, const std::vector<Chapter>& chapters) {
  std::string h = "<html><head><title>USC Title " + std::to_string(title) + "</title></head><body>\n";
  h += "<!-- documentid:" + std::to_string(title) + " currentthrough:20190103 -->\n<!-- expcite:" + title_heading +
       " -->\n<h1 class=\"usc-title-head\">" + title_heading + "</h1>\n";
  int doc = 0;
  for (const auto& ch : chapters) {
    h += "<!-- documentid:" + std::to_string(title) + "_chapter" + std::to_string(++doc) + " -->\n<!-- expcite:" +
         title_heading + "!@!" + ch.heading + " -->\n<h3 class=\"chapter-head\">" + ch.heading + "</h3>\n";
    for (const auto& s : ch.sections) {
      h += "<!-- documentid:" + std::to_string(title) + "_" + s.number + " -->\n<!-- itempath:/" + std::to_string(title) +
           "/Sec. " + s.number + " -->\n<!-- expcite:" + title_heading + "!@!" + ch.heading + "!@!" + s.heading +
           " -->\n<!-- field-start:head -->\n<h3 class=\"section-head\">&sect;" + s.number + ". " + s.heading +
           "</h3>\n<!-- field-end:head -->\n";
      if (!s.statute.empty())
        h += "<!-- field-start:statute -->\n" + s.statute + "\n<!-- field-end:statute -->\n";
      h += "<!-- field-start:sourcecredit -->\n<p class=\"source-credit\">(July 30, 1947, ch. 388, 61 Stat. 633.)</p>\n"
           "<!-- field-end:sourcecredit -->\n";
      if (!s.notes.empty()) h += "<!-- field-start:notes -->\n" + s.notes + "\n<!-- field-end:notes -->\n";
    }
  }
  return h + "</body></html>\n";
}

/// Title 1 in miniature with entities, nested markup, notes and a repealed range.
inline std::string sample_title() {
  return title_file(
      1, "TITLE 1-GENERAL PROVISIONS",
      {{"CHAPTER 1-RULES OF CONSTRUCTION",
        {{"1", "Sec. 1. Words denoting number, gender, and so forth",
          "<p class=\"statutory-body\">In determining the meaning of any Act of Congress, unless the context "
          "indicates otherwise&mdash;</p>\n<p class=\"statutory-body-1em\">words importing the singular include "
          "and apply to several persons, parties, or things;</p>\n<p class=\"statutory-body-1em\">the words "
          "&ldquo;person&rdquo; and &ldquo;whoever&rdquo; include corporations, companies, associations, "
          "firms, partnerships, societies, and joint stock companies, as well as individuals;</p>",
          "<h4 class=\"note-head\">Amendments</h4><p class=\"note-body\">2012&mdash;Pub. L. 112-231 inserted "
          "a definition.</p>"},
         {"2", "Sec. 2. \"County\" as including \"parish\", and so forth",
          "<p class=\"statutory-body\">The word &ldquo;county&rdquo; includes a parish, or any other equivalent "
          "subdivision of a State or Territory of the United States.</p>",
          ""},
         {"3", "Sec. 3. \"Vessel\" as including all means of water transportation",
          "<p class=\"statutory-body\">The word &#8220;vessel&#8221; includes every description of watercraft "
          "or other artificial contrivance used, or capable of being used, as a means of transportation on "
          "water.</p>",
          ""}}},
       {"CHAPTER 2-ACTS AND RESOLUTIONS; FORMALITIES OF ENACTMENT; REPEALS; SEALING OF INSTRUMENTS",
        {{"101", "Sec. 101. Enacting clause",
          "<p class=\"statutory-body\">The enacting clause of all Acts of Congress shall be in the following "
          "form: &ldquo;Be it enacted by the Senate and House of Representatives of the United States of "
          "America in Congress assembled.&rdquo;</p>",
          ""},
         {"102", "Secs. 102 to 104. Repealed", "", ""},
         {"102", "Sec. 102. Resolving clause",
          "<p class=\"statutory-body\">The resolving clause of all joint resolutions shall be: &ldquo;Resolved "
          "by the Senate and House of Representatives of the United States of America in Congress "
          "assembled.&rdquo;</p>",
          ""},
         {"106a", "Sec. 106a. Promulgation of laws",
          "<p class=\"statutory-body\">Whenever a bill, order, resolution, or vote of the Senate and House of "
          "Representatives, having been approved by the President, becomes a law, it shall be received by "
          "the Archivist of the United States from the President, and a copy deposited in section&nbsp;112 "
          "of this title.</p>",
          ""}}}});
}

/// Tokens of all statute fields: tags dropped, a small entity table decoded,
/// then whitespace-separated words counted.
inline std::size_t oracle_statute_tokens(const std::string& html) {
  static const std::string start = "<!-- field-start:statute -->", end = "<!-- field-end:statute -->";
  static const std::regex tag("<[^>]*>");
  static const std::regex numeric("&#(x?)([0-9a-fA-F]+);");
  std::size_t tokens = 0;
  for (auto pos = html.find(start); pos != std::string::npos; pos = html.find(start, pos)) {
    pos += start.size();
    const auto stop = html.find(end, pos);
    std::string text = std::regex_replace(html.substr(pos, stop - pos), tag, " ");
    // Only spacing entities matter for counting; others become a letter.
    for (const auto* sp : {"&nbsp;", "&ensp;", "&emsp;", "&thinsp;", "&#160;", "&#xa0;", "&#xA0;"})
      for (std::size_t p; (p = text.find(sp)) != std::string::npos;) text.replace(p, std::strlen(sp), " ");
    text = std::regex_replace(text, numeric, "x");
    text = std::regex_replace(text, std::regex("&[A-Za-z]+;"), "x");
    std::istringstream words(text);
    for (std::string w; words >> w;) ++tokens;
    if (stop == std::string::npos) break;
    pos = stop;
  }
  return tokens;
}

struct ZipFile {
  std::string name;
  std::string data;
  bool deflate = true;
};

inline void put16(std::string& s, unsigned v) {
  s += static_cast<char>(v & 0xFF);
  s += static_cast<char>((v >> 8) & 0xFF);
}
inline void put32(std::string& s, std::uint32_t v) {
  put16(s, v & 0xFFFF);
  put16(s, v >> 16);
}

inline std::string raw_deflate(const std::string& data) {
  z_stream zs{};
  deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY);
  std::string out(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

inline void write_zip(const std::string& path, const std::vector<ZipFile>& files) {
  std::string body, central;
  for (const auto& f : files) {
    const auto payload = f.deflate ? raw_deflate(f.data) : f.data;
    const auto crc = static_cast<std::uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(f.data.data()),
                                                      static_cast<uInt>(f.data.size())));
    const auto offset = static_cast<std::uint32_t>(body.size());
    const unsigned method = f.deflate ? 8 : 0;
    put32(body, 0x04034b50);
    put16(body, 20), put16(body, 0), put16(body, method), put16(body, 0), put16(body, 0);
    put32(body, crc), put32(body, static_cast<std::uint32_t>(payload.size())),
        put32(body, static_cast<std::uint32_t>(f.data.size()));
    put16(body, static_cast<unsigned>(f.name.size())), put16(body, 0);
    body += f.name + payload;
    put32(central, 0x02014b50);
    put16(central, 20), put16(central, 20), put16(central, 0), put16(central, method), put16(central, 0),
        put16(central, 0);
    put32(central, crc), put32(central, static_cast<std::uint32_t>(payload.size())),
        put32(central, static_cast<std::uint32_t>(f.data.size()));
    put16(central, static_cast<unsigned>(f.name.size())), put16(central, 0), put16(central, 0), put16(central, 0),
        put16(central, 0);
    put32(central, 0), put32(central, offset);
    central += f.name;
  }
  std::string end;
  put32(end, 0x06054b50);
  put16(end, 0), put16(end, 0), put16(end, static_cast<unsigned>(files.size())),
      put16(end, static_cast<unsigned>(files.size()));
  put32(end, static_cast<std::uint32_t>(central.size())), put32(end, static_cast<std::uint32_t>(body.size()));
  put16(end, 0);
  std::ofstream(path, std::ios::binary) << body << central << end;
}

}  // namespace legisnet::usc_fixture
