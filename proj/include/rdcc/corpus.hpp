#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rdcc/crf.hpp"

namespace rdcc {

// The five clinical entity categories. Order is fixed: it defines the tag
// index layout and the per-type report order.
enum class EntityType : int { Disease = 0, Symptom, Exam, Treatment, Body };

inline constexpr int kNumEntityTypes = 5;

char entity_code(EntityType t);                    // 'd' 's' 'e' 't' 'b'
std::string_view entity_name(EntityType t);        // "disease" ...
std::optional<EntityType> entity_from_name(std::string_view name);
std::optional<EntityType> entity_from_code(char code);

// Position markers of the tag scheme. O carries no entity type.
enum class Marker : int { B = 0, I, E, S, O };

struct Tag {
  Marker marker = Marker::O;
  EntityType type = EntityType::Disease;  // meaningful iff marker != O

  friend bool operator==(const Tag& a, const Tag& b) {
    if (a.marker != b.marker) return false;
    return a.marker == Marker::O || a.type == b.type;
  }
};

// 5 types x {B, I, E, S} + O = 21 tags. O is index 0.
inline constexpr int kTagCount = 21;

int tag_id(const Tag& tag);
Tag tag_from_id(int id);
std::string tag_to_string(const Tag& tag);        // "O", "B-b", "I-s", ...
std::optional<Tag> tag_from_string(std::string_view s);
inline std::string tag_to_string(int id) { return tag_to_string(tag_from_id(id)); }

// Inclusive character span of one entity, in code-point coordinates.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  EntityType type = EntityType::Disease;

  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

// A comma-delimited clause. `offset` locates chars[0] in the source text, so
// concatenating clauses in order reproduces the source exactly.
struct Clause {
  std::u32string chars;
  std::size_t offset = 0;
};

// Spans -> per-character tag ids. Single-char spans get S, longer ones
// B..I..E, everything else O. Rejects overlapping or out-of-range spans.
std::vector<int> encode_bieos(std::vector<EntitySpan> spans, std::size_t n);

// Tag ids -> spans. Total inverse of encode_bieos: valid sequences decode
// exactly; malformed ones are repaired (B or S always opens a new span, an
// I/E without an open same-type span opens one, E and S close the open
// span). Never produces overlapping spans.
std::vector<EntitySpan> decode_bieos(std::span<const int> tag_ids);

// Splits on full-width and ASCII commas; the delimiter stays with the
// preceding clause.
std::vector<Clause> split_clauses(std::u32string_view text);

// Distributes document-coordinate spans onto clauses (clause-local
// coordinates). A span crossing a clause boundary is a data error.
std::vector<std::vector<EntitySpan>> spans_per_clause(
    const std::vector<Clause>& clauses, const std::vector<EntitySpan>& spans);

struct PrCounts {
  long tp = 0, fp = 0, fn = 0;

  double precision() const { return tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0; }
  double recall() const { return tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
  }
};

struct EvalReport {
  std::array<PrCounts, kNumEntityTypes> per_type;
  PrCounts micro;
};

// Strict entity-level evaluation: a prediction is a true positive iff
// (start, end, type) all match a gold span in the same clause. `gold` and
// `pred` must be aligned lists over the same clauses.
EvalReport evaluate(const std::vector<std::vector<EntitySpan>>& gold,
                    const std::vector<std::vector<EntitySpan>>& pred);

// One annotated document: raw text plus document-coordinate spans.
struct CorpusRecord {
  std::u32string text;
  std::vector<EntitySpan> entities;
};

// JSON-lines corpus: one object per line,
//   {"text": "...", "entities": [{"start": 0, "end": 2, "type": "body"}]}
// with `end` inclusive. Errors carry line numbers.
std::vector<CorpusRecord> load_corpus_jsonl(const std::string& path);
std::vector<CorpusRecord> parse_corpus_jsonl(std::istream& in,
                                             const char* what = "corpus");
std::string corpus_record_to_json(const CorpusRecord& record);

// Two-column "char<TAB>tag" export, blank line between clauses.
std::string format_tag_columns(
    const std::vector<Clause>& clauses,
    const std::vector<std::vector<int>>& tag_ids_per_clause);

// Allowed BIEOS transitions over the 21-tag vocabulary (start row included):
// B/I may only continue into I/E of the same type; O, E and S may only be
// followed by O, B or S; the first tag may not be I or E.
TransitionMask bieos_transition_mask();

}  // namespace rdcc
