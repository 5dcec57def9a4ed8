#pragma once

#include <random>
#include <string>
#include <vector>

namespace legisnet::testing {

// Random document in canonical form, built directly as XML text.
inline std::string random_document(std::mt19937_64& rng, int doc_no) {
  std::uniform_int_distribution<int> small(0, 3);
  const std::vector<std::string> words = {"alpha", "beta", "gamma", "&", "<x>", "\"q\"", "ü", "§"};
  const auto text = [&] {
    std::string t;
    const int n = small(rng) * 2;
    for (int i = 0; i < n; ++i) t += words[static_cast<std::size_t>(rng() % words.size())] + (i % 2 ? "\n\t" : "  ");
    std::string esc;
    for (char c : t) {
      if (c == '&') esc += "&amp;";
      else if (c == '<') esc += "&lt;";
      else if (c == '>') esc += "&gt;";
      else esc.push_back(c);
    }
    return esc;
  };
  int key = 1;
  std::string x = "<document abbreviation=\"D" + std::to_string(doc_no) + "\">";
  const int items = small(rng);
  for (int i = 0; i < items; ++i) {
    x += "<item heading=\"Part " + std::to_string(i) + "\"" + (rng() % 5 == 0 ? " appendix=\"true\"" : "") + ">";
    const int seqs = small(rng) + 1;
    for (int s = 0; s < seqs; ++s) {
      x += "<seqitem citekey=\"" + std::to_string(key++) + (rng() % 4 == 0 ? "a" : "") + "\">" + text();
      const int subs = small(rng);
      for (int u = 0; u < subs; ++u) {
        x += "<subseqitem heading=\"(" + std::to_string(u) + ")\">" + text();
        if (rng() % 3 == 0) x += "<subseqitem>" + text() + "</subseqitem>";
        x += "</subseqitem>" + text();
      }
      x += "</seqitem>";
    }
    x += "</item>";
  }
  x += "</document>";
  return x;
}

}  // namespace legisnet::testing
