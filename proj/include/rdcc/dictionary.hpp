#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rdcc/corpus.hpp"

namespace rdcc {

// Typed clinical lexicon. Lookup is exact on full surface strings; entries
// are immutable after load.
class Lexicon {
 public:
  // Throws DataError on empty surfaces or on a duplicate surface with a
  // conflicting type. Re-adding the same (surface, type) pair is a no-op.
  void add(std::u32string surface, EntityType type);

  std::optional<EntityType> find(std::u32string_view surface) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t max_surface_len() const { return max_len_; }
  const std::unordered_map<std::u32string, EntityType>& entries() const {
    return entries_;
  }

  // UTF-8 TSV, one "surface<TAB>type" per line. The type column accepts
  // entity names ("body") or single-letter codes ("b"). '#' starts a
  // comment line; blank lines are skipped.
  static Lexicon load_tsv(const std::string& path);
  static Lexicon parse_tsv(std::string_view content,
                           const char* what = "lexicon");

 private:
  std::unordered_map<std::u32string, EntityType> entries_;
  std::size_t max_len_ = 0;
};

// One tile of a maximum-matching segmentation. `type` is set iff the
// segment is a lexicon match.
struct DictSegment {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::optional<EntityType> type;

  friend bool operator==(const DictSegment&, const DictSegment&) = default;
};

// Bi-directional maximum matching: runs the greedy longest-match scan both
// left-to-right and right-to-left (unmatched characters become single-char
// segments) and keeps the segmentation with fewer segments; ties fall to the
// one with fewer single-character segments, then to the backward result.
// The returned segments tile [0, n) exactly.
std::vector<DictSegment> bdmm_segment(std::u32string_view clause,
                                      const Lexicon& lexicon);

// Per-character dictionary feature: a positional tag within each matched
// segment (S for single-char matches, B/I/E otherwise), nullopt ("None")
// everywhere else.
using DictFeature = std::optional<Tag>;
std::vector<DictFeature> dict_features(std::u32string_view clause,
                                       const Lexicon& lexicon);

std::string dict_feature_to_string(const DictFeature& f);  // "None" or "B-s"

}  // namespace rdcc
