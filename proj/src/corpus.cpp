#include "rdcc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rdcc/errors.hpp"
#include "rdcc/utf8.hpp"

namespace rdcc {

namespace {

constexpr char32_t kFullWidthComma = U'，';
constexpr char32_t kAsciiComma = U',';

constexpr std::array<char, kNumEntityTypes> kCodes = {'d', 's', 'e', 't', 'b'};
constexpr std::array<std::string_view, kNumEntityTypes> kNames = {
    "disease", "symptom", "exam", "treatment", "body"};

std::string span_str(const EntitySpan& s) {
  return "(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ", " +
         std::string(entity_name(s.type)) + ")";
}

}  // namespace

char entity_code(EntityType t) { return kCodes[static_cast<int>(t)]; }

std::string_view entity_name(EntityType t) { return kNames[static_cast<int>(t)]; }

std::optional<EntityType> entity_from_name(std::string_view name) {
  for (int i = 0; i < kNumEntityTypes; ++i)
    if (kNames[i] == name) return static_cast<EntityType>(i);
  return std::nullopt;
}

std::optional<EntityType> entity_from_code(char code) {
  for (int i = 0; i < kNumEntityTypes; ++i)
    if (kCodes[i] == code) return static_cast<EntityType>(i);
  return std::nullopt;
}

int tag_id(const Tag& tag) {
  if (tag.marker == Marker::O) return 0;
  return 1 + static_cast<int>(tag.type) * 4 + static_cast<int>(tag.marker);
}

Tag tag_from_id(int id) {
  if (id < 0 || id >= kTagCount)
    throw std::invalid_argument("tag id " + std::to_string(id) +
                                " out of range [0, 21)");
  if (id == 0) return Tag{Marker::O, EntityType::Disease};
  const int x = id - 1;
  return Tag{static_cast<Marker>(x % 4), static_cast<EntityType>(x / 4)};
}

std::string tag_to_string(const Tag& tag) {
  if (tag.marker == Marker::O) return "O";
  static constexpr std::array<char, 4> markers = {'B', 'I', 'E', 'S'};
  std::string s;
  s += markers[static_cast<int>(tag.marker)];
  s += '-';
  s += entity_code(tag.type);
  return s;
}

std::optional<Tag> tag_from_string(std::string_view s) {
  if (s == "O") return Tag{Marker::O, EntityType::Disease};
  if (s.size() != 3 || s[1] != '-') return std::nullopt;
  Marker m;
  switch (s[0]) {
    case 'B': m = Marker::B; break;
    case 'I': m = Marker::I; break;
    case 'E': m = Marker::E; break;
    case 'S': m = Marker::S; break;
    default: return std::nullopt;
  }
  const auto type = entity_from_code(s[2]);
  if (!type) return std::nullopt;
  return Tag{m, *type};
}

std::vector<int> encode_bieos(std::vector<EntitySpan> spans, std::size_t n) {
  for (const auto& s : spans) {
    if (s.start > s.end || s.end >= n)
      throw DataError("entity span " + span_str(s) +
                      " out of range for clause length " + std::to_string(n));
  }
  std::sort(spans.begin(), spans.end(),
            [](const EntitySpan& a, const EntitySpan& b) {
              return a.start < b.start;
            });
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].start <= spans[i - 1].end)
      throw DataError("entity spans " + span_str(spans[i - 1]) + " and " +
                      span_str(spans[i]) + " overlap");
  }
  std::vector<int> tags(n, 0);
  for (const auto& s : spans) {
    if (s.start == s.end) {
      tags[s.start] = tag_id({Marker::S, s.type});
    } else {
      tags[s.start] = tag_id({Marker::B, s.type});
      tags[s.end] = tag_id({Marker::E, s.type});
      for (std::size_t i = s.start + 1; i < s.end; ++i)
        tags[i] = tag_id({Marker::I, s.type});
    }
  }
  return tags;
}

std::vector<EntitySpan> decode_bieos(std::span<const int> tag_ids) {
  std::vector<EntitySpan> spans;
  bool open = false;
  EntitySpan cur;
  auto close = [&](std::size_t end) {
    if (open) {
      cur.end = end;
      spans.push_back(cur);
      open = false;
    }
  };
  for (std::size_t i = 0; i < tag_ids.size(); ++i) {
    const Tag tag = tag_from_id(tag_ids[i]);
    switch (tag.marker) {
      case Marker::O:
        close(i - 1);
        break;
      case Marker::S:
        close(i - 1);
        spans.push_back({i, i, tag.type});
        break;
      case Marker::B:
        close(i - 1);
        open = true;
        cur = {i, i, tag.type};
        break;
      case Marker::I:
        if (!open || cur.type != tag.type) {
          close(i - 1);
          open = true;
          cur = {i, i, tag.type};
        }
        break;
      case Marker::E:
        if (open && cur.type == tag.type) {
          close(i);
        } else {
          close(i - 1);
          spans.push_back({i, i, tag.type});
        }
        break;
    }
  }
  close(tag_ids.size() - 1);
  return spans;
}

std::vector<Clause> split_clauses(std::u32string_view text) {
  std::vector<Clause> clauses;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == kFullWidthComma || text[i] == kAsciiComma) {
      clauses.push_back({std::u32string(text.substr(begin, i - begin + 1)),
                         begin});
      begin = i + 1;
    }
  }
  if (begin < text.size())
    clauses.push_back({std::u32string(text.substr(begin)), begin});
  return clauses;
}

std::vector<std::vector<EntitySpan>> spans_per_clause(
    const std::vector<Clause>& clauses, const std::vector<EntitySpan>& spans) {
  std::vector<std::vector<EntitySpan>> out(clauses.size());
  for (const auto& s : spans) {
    bool placed = false;
    for (std::size_t c = 0; c < clauses.size(); ++c) {
      const std::size_t lo = clauses[c].offset;
      const std::size_t hi = lo + clauses[c].chars.size();  // exclusive
      if (s.start >= lo && s.start < hi) {
        if (s.end >= hi)
          throw DataError("entity span " + span_str(s) +
                          " crosses a clause boundary at offset " +
                          std::to_string(hi));
        out[c].push_back({s.start - lo, s.end - lo, s.type});
        placed = true;
        break;
      }
    }
    if (!placed)
      throw DataError("entity span " + span_str(s) + " lies outside the text");
  }
  return out;
}

EvalReport evaluate(const std::vector<std::vector<EntitySpan>>& gold,
                    const std::vector<std::vector<EntitySpan>>& pred) {
  if (gold.size() != pred.size())
    throw DataError("evaluate: " + std::to_string(gold.size()) +
                    " gold clauses vs " + std::to_string(pred.size()) +
                    " predicted clauses");
  EvalReport rep;
  for (std::size_t c = 0; c < gold.size(); ++c) {
    for (const auto& p : pred[c]) {
      const bool hit = std::find(gold[c].begin(), gold[c].end(), p) !=
                       gold[c].end();
      auto& counts = rep.per_type[static_cast<int>(p.type)];
      if (hit)
        ++counts.tp;
      else
        ++counts.fp;
    }
    for (const auto& g : gold[c]) {
      const bool hit = std::find(pred[c].begin(), pred[c].end(), g) !=
                       pred[c].end();
      if (!hit) ++rep.per_type[static_cast<int>(g.type)].fn;
    }
  }
  for (const auto& t : rep.per_type) {
    rep.micro.tp += t.tp;
    rep.micro.fp += t.fp;
    rep.micro.fn += t.fn;
  }
  return rep;
}

namespace {

CorpusRecord record_from_json(const nlohmann::json& obj, const char* what,
                              std::size_t line_no) {
  const std::string where =
      std::string(what) + " line " + std::to_string(line_no);
  if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string())
    throw DataError(where + ": expected an object with a \"text\" string");
  CorpusRecord rec;
  rec.text = utf8_decode(obj["text"].get<std::string>(), what);
  if (obj.contains("entities")) {
    if (!obj["entities"].is_array())
      throw DataError(where + ": \"entities\" must be an array");
    for (const auto& e : obj["entities"]) {
      if (!e.is_object() || !e.contains("start") || !e.contains("end") ||
          !e.contains("type"))
        throw DataError(where + ": entity needs start/end/type");
      const auto type = entity_from_name(e["type"].get<std::string>());
      if (!type)
        throw DataError(where + ": unknown entity type \"" +
                        e["type"].get<std::string>() + "\"");
      const long start = e["start"].get<long>();
      const long end = e["end"].get<long>();
      if (start < 0 || end < start ||
          static_cast<std::size_t>(end) >= rec.text.size())
        throw DataError(where + ": entity range [" + std::to_string(start) +
                        ", " + std::to_string(end) +
                        "] out of bounds for text length " +
                        std::to_string(rec.text.size()));
      rec.entities.push_back({static_cast<std::size_t>(start),
                              static_cast<std::size_t>(end), *type});
    }
  }
  return rec;
}

}  // namespace

std::vector<CorpusRecord> parse_corpus_jsonl(std::istream& in,
                                             const char* what) {
  std::vector<CorpusRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string(what) + " line " + std::to_string(line_no) +
                      ": " + e.what());
    }
    records.push_back(record_from_json(obj, what, line_no));
  }
  return records;
}

std::vector<CorpusRecord> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path);
  return parse_corpus_jsonl(in, path.c_str());
}

std::string corpus_record_to_json(const CorpusRecord& record) {
  nlohmann::json obj;
  obj["text"] = utf8_encode(record.text);
  obj["entities"] = nlohmann::json::array();
  for (const auto& s : record.entities) {
    obj["entities"].push_back({{"start", s.start},
                               {"end", s.end},
                               {"type", std::string(entity_name(s.type))}});
  }
  return obj.dump();
}

std::string format_tag_columns(
    const std::vector<Clause>& clauses,
    const std::vector<std::vector<int>>& tag_ids_per_clause) {
  if (clauses.size() != tag_ids_per_clause.size())
    throw std::invalid_argument("format_tag_columns: clause/tag list mismatch");
  std::string out;
  for (std::size_t c = 0; c < clauses.size(); ++c) {
    if (clauses[c].chars.size() != tag_ids_per_clause[c].size())
      throw std::invalid_argument(
          "format_tag_columns: clause length != tag count");
    if (c) out += '\n';
    for (std::size_t i = 0; i < clauses[c].chars.size(); ++i) {
      out += utf8_encode(clauses[c].chars[i]);
      out += '\t';
      out += tag_to_string(tag_ids_per_clause[c][i]);
      out += '\n';
    }
  }
  return out;
}

TransitionMask bieos_transition_mask() {
  TransitionMask m = TransitionMask::all_allowed(kTagCount);
  auto entering_ok = [](const Tag& from, const Tag& to) {
    switch (to.marker) {
      case Marker::O:
      case Marker::B:
      case Marker::S:
        // Entering O/B/S requires the previous entity (if any) to be done.
        return from.marker == Marker::O || from.marker == Marker::E ||
               from.marker == Marker::S;
      case Marker::I:
      case Marker::E:
        // Continuing an entity requires an open one of the same type.
        return (from.marker == Marker::B || from.marker == Marker::I) &&
               from.type == to.type;
    }
    return true;
  };
  for (int to = 0; to < kTagCount; ++to) {
    const Tag to_tag = tag_from_id(to);
    for (int from = 0; from < kTagCount; ++from)
      m.set(from, to, entering_ok(tag_from_id(from), to_tag));
    // From the start state only O, B or S may open the sequence.
    const bool start_ok =
        to_tag.marker == Marker::O || to_tag.marker == Marker::B ||
        to_tag.marker == Marker::S;
    m.set(crf_start_row(kTagCount), to, start_ok);
  }
  return m;
}

}  // namespace rdcc
