#include "rdcc/dictionary.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rdcc/errors.hpp"
#include "rdcc/utf8.hpp"

namespace rdcc {

void Lexicon::add(std::u32string surface, EntityType type) {
  if (surface.empty()) throw DataError("lexicon: empty surface string");
  auto [it, inserted] = entries_.emplace(std::move(surface), type);
  if (!inserted && it->second != type)
    throw DataError("lexicon: surface \"" + utf8_encode(it->first) +
                    "\" listed as both " + std::string(entity_name(it->second)) +
                    " and " + std::string(entity_name(type)));
  max_len_ = std::max(max_len_, it->first.size());
}

std::optional<EntityType> Lexicon::find(std::u32string_view surface) const {
  const auto it = entries_.find(std::u32string(surface));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

Lexicon Lexicon::parse_tsv(std::string_view content, const char* what) {
  Lexicon lex;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const std::size_t nl = content.find('\n', pos);
    std::string_view line = content.substr(
        pos, nl == std::string_view::npos ? content.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    const std::string where =
        std::string(what) + " line " + std::to_string(line_no);
    if (tab == std::string_view::npos)
      throw DataError(where + ": expected \"surface<TAB>type\"");
    const std::string_view surface = line.substr(0, tab);
    std::string_view type_str = line.substr(tab + 1);
    while (!type_str.empty() && (type_str.back() == ' ' || type_str.back() == '\t'))
      type_str.remove_suffix(1);
    std::optional<EntityType> type = entity_from_name(type_str);
    if (!type && type_str.size() == 1) type = entity_from_code(type_str[0]);
    if (!type)
      throw DataError(where + ": unknown entity type \"" +
                      std::string(type_str) + "\"");
    try {
      lex.add(utf8_decode(surface, what), *type);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return lex;
}

Lexicon Lexicon::load_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open lexicon file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_tsv(buf.str(), path.c_str());
}

namespace {

// Greedy longest-match scan. `forward` scans left-to-right matching
// prefixes; otherwise right-to-left matching suffixes. Unmatched characters
// become single-char non-entity segments.
std::vector<DictSegment> max_match(std::u32string_view clause,
                                   const Lexicon& lex, bool forward) {
  const std::size_t n = clause.size();
  std::vector<DictSegment> segs;
  if (forward) {
    std::size_t i = 0;
    while (i < n) {
      std::size_t len = std::min(lex.max_surface_len(), n - i);
      for (; len >= 1; --len) {
        if (auto t = lex.find(clause.substr(i, len))) {
          segs.push_back({i, i + len - 1, t});
          break;
        }
      }
      if (len == 0) {
        segs.push_back({i, i, std::nullopt});
        len = 1;
      }
      i += len;
    }
  } else {
    std::size_t end = n;  // exclusive
    while (end > 0) {
      std::size_t len = std::min(lex.max_surface_len(), end);
      for (; len >= 1; --len) {
        if (auto t = lex.find(clause.substr(end - len, len))) {
          segs.push_back({end - len, end - 1, t});
          break;
        }
      }
      if (len == 0) {
        segs.push_back({end - 1, end - 1, std::nullopt});
        len = 1;
      }
      end -= len;
    }
    std::reverse(segs.begin(), segs.end());
  }
  return segs;
}

std::size_t single_char_count(const std::vector<DictSegment>& segs) {
  std::size_t c = 0;
  for (const auto& s : segs)
    if (s.start == s.end) ++c;
  return c;
}

}  // namespace

std::vector<DictSegment> bdmm_segment(std::u32string_view clause,
                                      const Lexicon& lexicon) {
  auto fwd = max_match(clause, lexicon, true);
  auto bwd = max_match(clause, lexicon, false);
  if (fwd.size() != bwd.size()) return fwd.size() < bwd.size() ? fwd : bwd;
  if (single_char_count(fwd) < single_char_count(bwd)) return fwd;
  return bwd;
}

std::vector<DictFeature> dict_features(std::u32string_view clause,
                                       const Lexicon& lexicon) {
  std::vector<DictFeature> out(clause.size(), std::nullopt);
  for (const auto& seg : bdmm_segment(clause, lexicon)) {
    if (!seg.type) continue;
    if (seg.start == seg.end) {
      out[seg.start] = Tag{Marker::S, *seg.type};
    } else {
      out[seg.start] = Tag{Marker::B, *seg.type};
      out[seg.end] = Tag{Marker::E, *seg.type};
      for (std::size_t i = seg.start + 1; i < seg.end; ++i)
        out[i] = Tag{Marker::I, *seg.type};
    }
  }
  return out;
}

std::string dict_feature_to_string(const DictFeature& f) {
  return f ? tag_to_string(*f) : "None";
}

}  // namespace rdcc
