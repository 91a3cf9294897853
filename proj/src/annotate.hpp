#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "textproc.hpp"

namespace ilmt {

inline constexpr const char* kDumSymbol = "<dum>";
inline constexpr const char* kBpeMarker = "@@";

enum class TagKind { Dum, Pos, Msd };

TagKind tag_kind_from_string(std::string_view s);
std::string to_string(TagKind kind);

struct Feature {
  std::string attr;
  std::string value;
  bool operator==(const Feature&) const = default;
};

struct AnnotatedToken {
  std::string form;
  std::string lemma;
  std::string upos;
  std::vector<Feature> feats;  // kept sorted by attribute name
};

struct AnnotatedSentence {
  std::vector<AnnotatedToken> tokens;
};

bool is_universal_pos(std::string_view upos);

// DUM -> "<dum>"; POS -> upos; MSD -> upos + "_" + "A=v|B=w" with attributes
// in lexicographic order, or upos + "__" when the feature set is empty.
std::string render_tag(const AnnotatedToken& tok, TagKind kind);

// Recognition grammar for rendered tags of any kind. Returns the kind when
// the token parses as a tag.
std::optional<TagKind> parse_tag(std::string_view token);

// tag1 word1 tag2 word2 ...; output length is exactly twice the word count.
Tokens interleave(const AnnotatedSentence& sent, TagKind kind);

struct StripStats {
  std::size_t stripped = 0;
};

// Grammar-based: removes every token the tag grammar recognizes, wherever it
// sits. Tolerates streams whose tag/word alternation is broken.
Tokens strip_tags(const Tokens& stream, StripStats* stats = nullptr);

// CoNLL-U reader. Maps FORM/LEMMA/UPOS/FEATS; "_" FEATS become the empty set;
// multiword range lines (id "a-b") and empty nodes (id "a.b") are skipped.
// Malformed input raises data_error carrying the 1-based line number.
std::vector<AnnotatedSentence> parse_conllu(std::istream& in,
                                            const std::string& source_name = "<conllu>");
std::vector<AnnotatedSentence> parse_conllu_file(const std::string& path);

}  // namespace ilmt
