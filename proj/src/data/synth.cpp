#include "mlg/data/synth.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "mlg/error.hpp"
#include "mlg/rng.hpp"

namespace mlg {

namespace {

const std::array<const char*, 3> kShapes = {"circle", "square", "triangle"};
const std::array<const char*, 3> kColors = {"red", "green", "blue"};
const std::array<const char*, 3> kCounts = {"one shape", "two shapes", "three shapes"};

std::array<int, 3> base_rgb(const std::string& color) {
  if (color == "red") return {205, 40, 40};
  if (color == "green") return {40, 185, 50};
  return {45, 65, 210};
}

struct Rect {
  int x, y, s;
  bool overlaps(const Rect& o) const { return x < o.x + o.s && o.x < x + s && y < o.y + o.s && o.y < y + s; }
};

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c == ' ') c = '_';
  return out;
}

std::string mask_file(const std::string& id, const std::string& kind) { return "masks/" + id + "__" + sanitize(kind) + ".png"; }

}  // namespace

std::vector<ShapeKind> default_shape_vocabulary() {
  std::vector<ShapeKind> v;
  for (const char* c : kColors)
    for (const char* s : kShapes) v.push_back({s, c});
  return v;
}

void SynthSpec::validate() const {
  if (image_size < 32) throw ValidationError("image_size must be >= 32");
  if (count < 1) throw ValidationError("count must be >= 1");
  if (vocabulary.empty()) throw ValidationError("shape vocabulary is empty");
  std::set<std::string> names;
  for (const auto& k : vocabulary) {
    if (std::find(kShapes.begin(), kShapes.end(), k.shape) == kShapes.end())
      throw ValidationError("unknown shape '" + k.shape + "'");
    if (std::find(kColors.begin(), kColors.end(), k.color) == kColors.end())
      throw ValidationError("unknown color '" + k.color + "'");
    if (!names.insert(k.name()).second) throw ValidationError("duplicate kind '" + k.name() + "'");
  }
  if (min_shapes < 1 || max_shapes < min_shapes || max_shapes > 3)
    throw ValidationError("shapes per image must satisfy 1 <= min <= max <= 3");
  if (static_cast<std::size_t>(max_shapes) > vocabulary.size())
    throw ValidationError("more shapes per image than distinct kinds");
  if (min_extent < 0 || max_extent < min_extent || max_extent > image_size)
    throw ValidationError("invalid shape extent range");
  if (max_retries < 1) throw ValidationError("max_retries must be >= 1");
}

std::vector<std::uint8_t> shape_footprint(const std::string& shape, int s) {
  std::vector<std::uint8_t> f(std::size_t(s) * s, 0);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      bool on = true;
      if (shape == "circle") {
        const int dx = 2 * c + 1 - s, dy = 2 * r + 1 - s;
        on = dx * dx + dy * dy <= s * s;
      } else if (shape == "triangle") {
        on = std::abs(2 * c + 1 - s) <= r + 1;
      }
      f[std::size_t(r) * s + c] = on;
    }
  return f;
}

std::string simple_prompt(const std::string& pathology) { return "findings suggesting " + pathology + "."; }

std::vector<std::string> synth_words(const SynthSpec& spec) {
  std::set<std::string> w = {"a", "in", "the", "upper", "lower", "left", "right", "image", "shows",
                             "no", "findings", "suggesting"};
  for (const char* c : kCounts) {
    std::istringstream ss(c);
    for (std::string t; ss >> t;) w.insert(t);
  }
  for (const auto& k : spec.vocabulary) {
    w.insert(k.shape);
    w.insert(k.color);
  }
  return {w.begin(), w.end()};
}

SynthCorpus synthesize_corpus(const SynthSpec& spec_in) {
  SynthSpec spec = spec_in;
  spec.validate();
  if (spec.max_extent == 0) {
    spec.min_extent = spec.image_size / 4;
    spec.max_extent = spec.image_size / 3;
  }
  const int n = spec.image_size;
  SynthCorpus out;
  out.corpus.reports.reserve(spec.count);
  const int id_width = std::max<int>(5, static_cast<int>(std::to_string(spec.count - 1).size()));

  for (int idx = 0; idx < spec.count; ++idx) {
    Engine rng(substream(spec.seed, static_cast<std::uint64_t>(idx)));
    std::string num = std::to_string(idx);
    const std::string id = spec.id_prefix + std::string(id_width - num.size(), '0') + num;

    Image img(n, n, 3);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(uniform_int(rng, 70, 120));

    const int k = static_cast<int>(uniform_int(rng, spec.min_shapes, spec.max_shapes));
    std::vector<std::size_t> order(spec.vocabulary.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order.begin(), order.end(), rng);

    std::vector<Rect> placed;
    std::vector<PlacedShape> shapes;
    for (int s = 0; s < k; ++s) {
      const ShapeKind& kind = spec.vocabulary[order[s]];
      const int extent = static_cast<int>(uniform_int(rng, spec.min_extent, spec.max_extent));
      Rect r{};
      bool ok = false;
      for (int attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
        r = {static_cast<int>(uniform_int(rng, 0, n - extent)), static_cast<int>(uniform_int(rng, 0, n - extent)),
             extent};
        ok = std::none_of(placed.begin(), placed.end(), [&](const Rect& o) { return o.overlaps(r); });
      }
      if (!ok)
        throw GenerationError("could not place shape " + std::to_string(s + 1) + " of sample '" + id + "' after " +
                              std::to_string(spec.max_retries) + " attempts");
      placed.push_back(r);

      const auto rgb = base_rgb(kind.color);
      const auto fp = shape_footprint(kind.shape, extent);
      Mask mask(n, n);
      for (int yy = 0; yy < extent; ++yy)
        for (int xx = 0; xx < extent; ++xx) {
          if (!fp[std::size_t(yy) * extent + xx]) continue;
          mask.at(r.y + yy, r.x + xx) = 1;
          for (int c = 0; c < 3; ++c)
            img.at(r.y + yy, r.x + xx, c) =
                static_cast<std::uint8_t>(std::clamp<std::int64_t>(rgb[c] + uniform_int(rng, -20, 20), 0, 255));
        }
      out.masks.emplace(std::make_pair(id, kind.name()), std::move(mask));

      const char* vert = 2 * r.y + extent < n ? "upper" : "lower";
      const char* horiz = 2 * r.x + extent < n ? "left" : "right";
      shapes.push_back({kind, r.x, r.y, extent, "a " + kind.name() + " in the " + vert + " " + horiz + "."});
    }

    std::vector<std::string> sentences;
    for (const auto& s : shapes) sentences.push_back(s.sentence);
    shuffle(sentences.begin(), sentences.end(), rng);

    Report rep;
    rep.id = id;
    rep.image = "images/" + id + ".png";
    for (std::size_t i = 0; i < sentences.size(); ++i) rep.findings += (i ? " " : "") + sentences[i];
    rep.impression = std::string("the image shows ") + kCounts[k - 1] + ".";
    std::map<std::string, int> labels;
    for (const auto& kind : spec.vocabulary) labels[kind.name()] = 0;
    for (const auto& s : shapes) labels[s.kind.name()] = 1;
    rep.labels = std::move(labels);

    out.corpus.reports.push_back(std::move(rep));
    out.images.push_back(std::move(img));
    out.shapes.push_back(std::move(shapes));
  }

  for (const auto& kind : spec.vocabulary)
    out.prompts.pathologies[kind.name()] = {{"a " + kind.name() + "."}, {"no " + kind.name() + "."}};
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SynthCorpus& synth) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  save_corpus(dir / "corpus.jsonl", synth.corpus);
  for (std::size_t i = 0; i < synth.images.size(); ++i)
    write_png(dir / synth.corpus.reports[i].image, synth.images[i]);

  std::ofstream ann(dir / "annotations.jsonl", std::ios::binary);
  std::ofstream cap(dir / "captions.jsonl", std::ios::binary);
  if (!ann || !cap) throw InputError("cannot write annotation files under '" + dir.string() + "'");
  for (std::size_t i = 0; i < synth.corpus.reports.size(); ++i) {
    const std::string& id = synth.corpus.reports[i].id;
    for (const auto& s : synth.shapes[i]) {
      const std::string kind = s.kind.name();
      const std::string file = mask_file(id, kind);
      write_mask_png(dir / file, synth.masks.at({id, kind}));
      nlohmann::ordered_json a{{"id", id}, {"pathology", kind}, {"mask", file}};
      ann << a.dump() << '\n';
      nlohmann::ordered_json c{{"id", id}, {"pathology", kind}, {"caption", s.sentence}};
      cap << c.dump() << '\n';
    }
  }
  save_prompts(dir / "prompts.json", synth.prompts);
}

std::map<std::pair<std::string, std::string>, std::string> load_captions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open captions '" + path.string() + "'");
  std::map<std::pair<std::string, std::string>, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("pathology") || !j.contains("caption"))
      throw ParseError("caption record needs id, pathology and caption", line_no);
    out[{j["id"].get<std::string>(), j["pathology"].get<std::string>()}] = j["caption"].get<std::string>();
  }
  return out;
}

}  // namespace mlg
