#include "annotate.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

namespace ilmt {

namespace {

// Universal POS inventory (UD v2).
constexpr std::array<std::string_view, 17> kUpos = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET",  "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

bool valid_attr(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])))) return false;
  for (char c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    if (!std::isalnum(u) && c != '[' && c != ']') return false;
  }
  return true;
}

bool valid_value(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    if (!std::isalnum(u) && c != ',' && c != '.') return false;
  }
  return true;
}

// Parses "A=v|B=w" (or "_" for the empty set) into a sorted feature list.
// Returns false on malformed input.
bool parse_feats(std::string_view s, std::vector<Feature>& out) {
  out.clear();
  if (s == "_") return true;
  if (s.empty()) return false;
  for (const std::string& item : split_char(std::string(s), '|')) {
    std::size_t eq = item.find('=');
    if (eq == std::string::npos) return false;
    Feature f{item.substr(0, eq), item.substr(eq + 1)};
    if (!valid_attr(f.attr) || !valid_value(f.value)) return false;
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(),
            [](const Feature& a, const Feature& b) { return a.attr < b.attr; });
  return true;
}

}  // namespace

TagKind tag_kind_from_string(std::string_view s) {
  if (s == "dum") return TagKind::Dum;
  if (s == "pos") return TagKind::Pos;
  if (s == "msd") return TagKind::Msd;
  throw std::invalid_argument("unknown tag kind: " + std::string(s) +
                              " (expected dum, pos, or msd)");
}

std::string to_string(TagKind kind) {
  switch (kind) {
    case TagKind::Dum: return "dum";
    case TagKind::Pos: return "pos";
    case TagKind::Msd: return "msd";
  }
  return "?";
}

bool is_universal_pos(std::string_view upos) {
  return std::find(kUpos.begin(), kUpos.end(), upos) != kUpos.end();
}

std::string render_tag(const AnnotatedToken& tok, TagKind kind) {
  switch (kind) {
    case TagKind::Dum:
      return kDumSymbol;
    case TagKind::Pos:
      return tok.upos;
    case TagKind::Msd: {
      std::string out = tok.upos;
      out += '_';
      if (tok.feats.empty()) {
        out += '_';
        return out;
      }
      std::vector<Feature> sorted = tok.feats;
      std::sort(sorted.begin(), sorted.end(),
                [](const Feature& a, const Feature& b) { return a.attr < b.attr; });
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i) out += '|';
        out += sorted[i].attr;
        out += '=';
        out += sorted[i].value;
      }
      return out;
    }
  }
  return {};
}

std::optional<TagKind> parse_tag(std::string_view token) {
  if (token == kDumSymbol) return TagKind::Dum;
  if (is_universal_pos(token)) return TagKind::Pos;
  // MSD shape: UPOS "_" feats, where feats is "_" or an A=v|B=w list.
  std::size_t us = token.find('_');
  if (us == std::string_view::npos) return std::nullopt;
  if (!is_universal_pos(token.substr(0, us))) return std::nullopt;
  std::vector<Feature> feats;
  if (!parse_feats(token.substr(us + 1), feats)) return std::nullopt;
  return TagKind::Msd;
}

Tokens interleave(const AnnotatedSentence& sent, TagKind kind) {
  Tokens out;
  out.reserve(sent.tokens.size() * 2);
  for (const AnnotatedToken& tok : sent.tokens) {
    out.push_back(render_tag(tok, kind));
    out.push_back(tok.form);
  }
  return out;
}

Tokens strip_tags(const Tokens& stream, StripStats* stats) {
  Tokens out;
  out.reserve(stream.size());
  for (const std::string& tok : stream) {
    if (parse_tag(tok)) {
      if (stats) ++stats->stripped;
    } else {
      out.push_back(tok);
    }
  }
  return out;
}

std::vector<AnnotatedSentence> parse_conllu(std::istream& in, const std::string& source_name) {
  std::vector<AnnotatedSentence> sents;
  AnnotatedSentence cur;
  std::size_t expected_id = 1;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) {
    throw data_error(source_name + ":" + std::to_string(lineno) + ": " + what);
  };
  auto flush = [&] {
    if (!cur.tokens.empty()) {
      sents.push_back(std::move(cur));
      cur = {};
    }
    expected_id = 1;
  };
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') continue;
    std::vector<std::string> cols = split_char(line, '\t');
    if (cols.size() != 10) {
      fail("expected 10 tab-separated columns, got " + std::to_string(cols.size()));
    }
    const std::string& id = cols[0];
    // Multiword ranges ("4-5") and empty nodes ("4.1") carry no annotation
    // of their own for our purposes.
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;
    std::size_t parsed = 0;
    try {
      std::size_t pos = 0;
      parsed = std::stoull(id, &pos);
      if (pos != id.size()) fail("bad token id '" + id + "'");
    } catch (const std::logic_error&) {
      fail("bad token id '" + id + "'");
    }
    if (parsed != expected_id) {
      fail("token id " + id + " out of sequence (expected " + std::to_string(expected_id) + ")");
    }
    ++expected_id;
    AnnotatedToken tok;
    tok.form = cols[1];
    tok.lemma = cols[2];
    tok.upos = cols[3];
    if (tok.form.empty() || tok.form == "_") fail("missing form");
    if (!is_universal_pos(tok.upos)) fail("unknown UPOS '" + tok.upos + "'");
    if (!parse_feats(cols[5], tok.feats)) fail("malformed FEATS '" + cols[5] + "'");
    cur.tokens.push_back(std::move(tok));
  }
  flush();
  return sents;
}

std::vector<AnnotatedSentence> parse_conllu_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  return parse_conllu(in, path);
}

}  // namespace ilmt
