#include "mlg/text/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "mlg/error.hpp"
#include "mlg/rng.hpp"

namespace mlg {

namespace {

bool is_terminal(char c) { return c == '.' || c == '?' || c == '!' || c == ';'; }

std::string normalize_word(const std::string& raw) {
  std::string w;
  for (char c : raw) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '-' || c == '\'' || u >= 0x80) w += static_cast<char>(std::tolower(u));
  }
  return w;
}

}  // namespace

Vocabulary Vocabulary::parse(const std::string& text) {
  Vocabulary v;
  v.entries_.clear();
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  int max_id = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line[0] == '#' && line.compare(0, 2, "##") != 0)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected '<surface>\\t<ids>'", line_no);
    std::string surface = line.substr(0, tab);
    std::istringstream ids(line.substr(tab + 1));
    std::vector<int> seq;
    for (std::string t; ids >> t;) {
      int id = 0;
      try {
        std::size_t used = 0;
        id = std::stoi(t, &used);
        if (used != t.size() || id < 0) throw std::invalid_argument(t);
      } catch (const std::exception&) {
        throw ParseError("bad token id '" + t + "'", line_no);
      }
      seq.push_back(id);
      max_id = std::max(max_id, id);
    }
    if (seq.empty()) throw ParseError("entry '" + surface + "' has no ids", line_no);
    if (!v.entries_.emplace(surface, std::move(seq)).second)
      throw ParseError("duplicate surface '" + surface + "'", line_no);
  }
  for (const char* special : {"[PAD]", "[UNK]"}) {
    auto it = v.entries_.find(special);
    if (it == v.entries_.end() || it->second.size() != 1)
      throw ParseError(std::string("tokenizer config needs a single-id ") + special + " entry", 0);
  }
  v.pad_ = v.entries_.at("[PAD]")[0];
  v.unk_ = v.entries_.at("[UNK]")[0];
  v.size_ = max_id + 1;
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open tokenizer config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  Vocabulary v;
  v.entries_ = {{"[PAD]", {0}}, {"[UNK]", {1}}};
  int next = 2;
  for (const auto& w : words)
    if (v.entries_.emplace(normalize_word(w), std::vector<int>{next}).second) ++next;
  v.size_ = next;
  return v;
}

std::string Vocabulary::format() const {
  // Ordered by first id so the file reads like a vocabulary listing.
  std::vector<std::pair<std::vector<int>, std::string>> rows;
  for (const auto& [s, ids] : entries_) rows.emplace_back(ids, s);
  std::sort(rows.begin(), rows.end());
  std::string out;
  for (const auto& [ids, s] : rows) {
    out += s;
    out += '\t';
    for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? " " : "") + std::to_string(ids[i]);
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << format();
}

std::uint64_t Vocabulary::hash() const {
  const std::string f = format();
  return fnv1a(f.data(), f.size());
}

std::vector<int> Vocabulary::lookup(const std::string& word) const {
  if (auto it = entries_.find(word); it != entries_.end()) return it->second;
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < word.size()) {
    const std::string prefix = pos == 0 ? "" : "##";
    std::size_t len = word.size() - pos;
    for (; len > 0; --len) {
      auto it = entries_.find(prefix + word.substr(pos, len));
      if (it != entries_.end()) {
        out.insert(out.end(), it->second.begin(), it->second.end());
        break;
      }
    }
    if (len == 0) return {unk_};
    pos += len;
  }
  return out;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    const auto b = cur.find_first_not_of(" \t\r\n");
    if (b != std::string::npos) {
      const auto e = cur.find_last_not_of(" \t\r\n");
      out.push_back(cur.substr(b, e - b + 1));
    }
    cur.clear();
  };
  for (char c : text) {
    cur += c;
    if (is_terminal(c)) flush();
  }
  flush();
  return out;
}

TokenizedReport tokenize(const std::string& text, const Vocabulary& vocab, int max_tokens) {
  if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
  TokenizedReport tok;
  std::vector<int> ids;
  for (const auto& sentence : split_sentences(text)) {
    if (static_cast<int>(ids.size()) >= max_tokens) {
      tok.truncated = true;
      break;
    }
    const int sentence_begin = static_cast<int>(ids.size());
    std::istringstream words(sentence);
    const int first_word = tok.words();
    for (std::string raw; words >> raw;) {
      const std::string w = normalize_word(raw);
      if (w.empty()) continue;
      std::vector<int> pieces = vocab.lookup(w);
      const int begin = static_cast<int>(ids.size());
      const int room = max_tokens - begin;
      if (room <= 0) {
        tok.truncated = true;
        break;
      }
      if (static_cast<int>(pieces.size()) > room) {
        pieces.resize(room);
        tok.truncated = true;
      }
      ids.insert(ids.end(), pieces.begin(), pieces.end());
      tok.word_spans.push_back({begin, static_cast<int>(ids.size())});
      tok.sentence_of_word.push_back(tok.sentences());
    }
    if (tok.words() > first_word) tok.sentence_spans.push_back({sentence_begin, static_cast<int>(ids.size())});
  }
  if (tok.word_spans.empty()) throw ValidationError("report text is empty");
  tok.valid_len = static_cast<int>(ids.size());
  ids.resize(max_tokens, vocab.pad_id());
  tok.token_ids = std::move(ids);
  return tok;
}

TokenizedReport tokenize(const Report& report, const Vocabulary& vocab, int max_tokens) {
  return tokenize(report.text(), vocab, max_tokens);
}

}  // namespace mlg
